"""Backward transmission problem in divergence form.

    u_t + (rho/2) (a u_x)_x + B u_x - lam u = g,   u(T, .) = f,
    a(+) u_x(+) = a(-) u_x(-) on every interface,

solved after straightening the interfaces to the integers.  The space
discretisation is a cell-centred finite-volume scheme whose faces include
every integer, so the interface flux is a single harmonic-mean expression
and the transmission condition holds exactly at the discrete level.
Time stepping is the theta-scheme.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .coefficients import ProblemSpec
from .profiles import Profile
from .transform import (DivergenceTriple, HatCoefficients, StraightenTransform,
                        divergence_triple, hat_coefficients, straighten)


class PDEError(ValueError):
    pass


@dataclass
class TransmissionPDE:
    """Problem data: the SDE triple ``(sigma, b, beta)`` on its curves plus ``lam, f, g``.

    ``scale`` picks the equivalent divergence triple ``(scale*rho, a/scale, B)``.
    """

    problem: ProblemSpec
    lam: float = 0.0
    f: Profile = field(default_factory=lambda: Profile("zero"))
    g: Profile = field(default_factory=lambda: Profile("zero"))
    scale: float = 1.0

    def __post_init__(self):
        if not self.lam >= 0:
            raise PDEError("lambda must be >= 0")
        self.f = Profile.from_config(self.f)
        self.g = Profile.from_config(self.g)

    @property
    def family(self):
        return self.problem.family

    @property
    def T(self) -> float:
        return self.problem.T

    @property
    def triple(self) -> DivergenceTriple:
        p = self.problem
        return divergence_triple(p.sigma, p.b, p.beta, p.family, self.scale)


@dataclass
class StraightenedPDE:
    """The problem seen in ``x_hat = Psi(t, x)``: interfaces sit at ``1..n``."""

    source: TransmissionPDE
    st: StraightenTransform
    hat: HatCoefficients
    triple: DivergenceTriple

    @property
    def T(self) -> float:
        return self.source.T

    @property
    def lam(self) -> float:
        return self.source.lam

    @property
    def interfaces(self) -> np.ndarray:
        return np.arange(1, self.st.n + 1, dtype=float)

    def f_hat(self, xh):
        return self.source.f(self.st.psi(self.T, xh))

    def g_hat(self, t, xh):
        return self.source.g(t, self.st.psi(t, xh))


def straighten_problem(pde: TransmissionPDE) -> StraightenedPDE:
    """Move to cylindrical interfaces; ``u(t, x) = u_hat(t, Psi(t, x))``."""
    if isinstance(pde, StraightenedPDE):
        return pde
    st = straighten(pde.family)
    p = pde.problem
    hat = hat_coefficients(st, p.sigma, p.b, p.beta)
    triple = divergence_triple(hat.sigma, hat.b, hat.beta, st.cylinder, pde.scale)
    return StraightenedPDE(pde, st, hat, triple)


@dataclass
class GridSolution:
    """Grid values in the straightened coordinate.

    ``nodes`` holds box edges, cell centres and the interfaces inside the
    box; ``u[m]`` are the values on ``nodes`` at ``times[m]``.  Interface
    values are the flux-matching reconstructions.
    """

    nodes: np.ndarray
    times: np.ndarray
    u: np.ndarray
    L: float
    N: int
    M: int
    theta: float
    h: float
    lo: float
    hi: float
    interfaces: np.ndarray
    u_cells: np.ndarray = field(repr=False)
    a_minus: np.ndarray = field(repr=False)
    a_plus: np.ndarray = field(repr=False)
    iface_cell: np.ndarray = field(repr=False)
    pde: StraightenedPDE = field(repr=False)

    @property
    def n_interfaces(self) -> int:
        return len(self.interfaces)

    def flux_mismatch(self) -> np.ndarray:
        """Relative ``|a+ D+u - a- D-u|`` at every interface and level, shape ``(M+1, n_if)``."""
        if len(self.iface_cell) == 0:
            return np.zeros((len(self.times), 0))
        n = self.iface_cell
        pos = np.searchsorted(self.nodes, self.interfaces)
        uI = self.u[:, pos]
        fm = self.a_minus * (uI - self.u_cells[:, n]) / (self.h / 2)
        fp = self.a_plus * (self.u_cells[:, n + 1] - uI) / (self.h / 2)
        return np.abs(fp - fm) / (np.abs(fp) + np.abs(fm) + 1.0)

    def to_csv(self, path) -> None:
        """Rows ``t,x,u`` in physical coordinates."""
        st = self.pde.st
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t,x,u\n")
            for m, t in enumerate(self.times):
                xs = st.psi(t, self.nodes)
                for x, v in zip(xs, self.u[m]):
                    fh.write(f"{t:.17g},{x:.17g},{v:.17g}\n")

    def to_grid_dump(self, path) -> None:
        """Little-endian float64: header ``L, N, M, I`` then ``u`` row-major."""
        head = np.array([self.L, len(self.nodes), self.M, self.n_interfaces], dtype="<f8")
        with open(path, "wb") as fh:
            fh.write(head.tobytes())
            fh.write(np.ascontiguousarray(self.u, dtype="<f8").tobytes())


def _box(cyl: StraightenedPDE, L: float, N: int, n_t: int = 201):
    ts = np.linspace(0.0, cyl.T, n_t)
    lo = float(min(cyl.st.Psi(t, -L) for t in ts))
    hi = float(max(cyl.st.Psi(t, L) for t in ts))
    # integer faces need h = 1/k
    k = max(2, int(round(N / (hi - lo))))
    h = 1.0 / k
    lo = math.floor(lo * k) / k
    hi = math.ceil(hi * k) / k
    n_cells = int(round((hi - lo) * k))
    return lo, hi, h, n_cells


class _Operator:
    """Tridiagonal ``A u + c`` for the spatial operator at one time level."""

    def __init__(self, cyl: StraightenedPDE, lo: float, h: float, n: int, bc):
        self.cyl = cyl
        self.h = h
        self.n = n
        self.centers = lo + h * (np.arange(n) + 0.5)
        faces = lo + h * np.arange(n + 1)
        near = np.round(faces)
        is_if = (np.abs(faces - near) < 1e-9) & (near >= 1) & (near <= cyl.st.n)
        is_if[0] = is_if[-1] = False
        self.iface_face = np.nonzero(is_if)[0]
        self.bc = bc

    def assemble(self, t):
        cyl, h, n, c = self.cyl, self.h, self.n, self.centers
        tri = cyl.triple
        a = tri.a(t, c, "right")
        rho = tri.rho(t, c, "right")
        B = tri.B(t, c, "right")
        lam = cyl.lam
        lower = np.zeros(n)
        diag = np.full(n, -lam)
        upper = np.zeros(n)
        const = np.zeros(n)
        # diffusion: faces 1..n-1 harmonic mean; edge faces half cell
        af = 2 * a[:-1] * a[1:] / (a[:-1] + a[1:])
        w = rho / (2 * h * h)
        upper[:-1] += w[:-1] * af
        diag[:-1] -= w[:-1] * af
        lower[1:] += w[1:] * af
        diag[1:] -= w[1:] * af
        bl, br = self.bc
        diag[0] -= w[0] * 2 * a[0]
        const[0] += w[0] * 2 * a[0] * bl
        diag[-1] -= w[-1] * 2 * a[-1]
        const[-1] += w[-1] * 2 * a[-1] * br
        # drift: central, or 3-point with the half-cell neighbour next to
        # an interface (flux-matched value) or an edge (boundary value)
        cl = np.full(n, -1.0 / (2 * h))
        c0 = np.zeros(n)
        cr = np.full(n, 1.0 / (2 * h))
        hl = np.full(n, h)
        hr = np.full(n, h)
        right_special = np.zeros(n, dtype=bool)
        left_special = np.zeros(n, dtype=bool)
        right_special[-1] = left_special[0] = True
        for fidx in self.iface_face:
            right_special[fidx - 1] = True
            left_special[fidx] = True
        hr[right_special] = h / 2
        hl[left_special] = h / 2
        sp = right_special | left_special
        cl[sp] = -hr[sp] / (hl[sp] * (hl[sp] + hr[sp]))
        c0[sp] = (hr[sp] - hl[sp]) / (hl[sp] * hr[sp])
        cr[sp] = hl[sp] / (hr[sp] * (hl[sp] + hr[sp]))
        dl = B * cl
        d0 = B * c0
        dr = B * cr
        diag += d0
        interior_l = np.ones(n, dtype=bool)
        interior_r = np.ones(n, dtype=bool)
        interior_l[0] = interior_r[-1] = False
        # edges: boundary value
        const[0] += dl[0] * bl
        const[-1] += dr[-1] * br
        # interface neighbours: u_I = wm u_n + wp u_{n+1}
        for fidx in self.iface_face:
            m, p = fidx - 1, fidx
            wm = a[m] / (a[m] + a[p])
            wp = a[p] / (a[m] + a[p])
            diag[m] += dr[m] * wm
            upper[m] += dr[m] * wp
            diag[p] += dl[p] * wp
            lower[p] += dl[p] * wm
            interior_r[m] = False
            interior_l[p] = False
        lower[interior_l] += dl[interior_l]
        upper[interior_r] += dr[interior_r]
        return lower, diag, upper, const, a

    @staticmethod
    def apply(lower, diag, upper, const, u):
        out = diag * u + const
        out[1:] += lower[1:] * u[:-1]
        out[:-1] += upper[:-1] * u[1:]
        return out


def solve(pde, L: float = 10.0, N: int = 800, M: int = 800, theta: float = 0.5,
          bc=(0.0, 0.0)) -> GridSolution:
    """Backward theta-scheme from ``u(T) = f``.

    Parameters
    ----------
    pde : TransmissionPDE or StraightenedPDE
        Straightened on the fly if needed.
    L : float
        Physical half-width; the straightened box covers ``[-L, L]`` at all times.
    N : int
        Target number of cells (rounded so that integers are faces).
    M : int
        Number of time steps.
    theta : float
        In ``[1/2, 1]``.
    bc : (float, float)
        Dirichlet values at the box edges.
    """
    if not 0.5 <= theta <= 1.0:
        raise PDEError("theta must lie in [1/2, 1]")
    if M < 1 or L <= 0:
        raise PDEError("need M >= 1 and L > 0")
    cyl = straighten_problem(pde)
    if N < 4 * cyl.st.n:
        raise PDEError(f"N must be >= 4 I = {4 * cyl.st.n}")
    lo, hi, h, n = _box(cyl, L, N)
    sup = cyl.source.g.support()
    if sup is None or sup[0] < -L or sup[1] > L:
        if not cyl.source.g.is_zero:
            warnings.warn("source support exceeds the box", RuntimeWarning, stacklevel=2)
    op = _Operator(cyl, lo, h, n, bc)
    times = np.linspace(0.0, cyl.T, M + 1)
    dt = cyl.T / M
    iface_x = lo + h * op.iface_face
    n_if = len(op.iface_face)
    u_cells = np.empty((M + 1, n))
    a_m = np.empty((M + 1, n_if))
    a_p = np.empty((M + 1, n_if))
    u = cyl.f_hat(op.centers)
    u_cells[M] = u
    low1, dia1, upp1, c1, a1 = op.assemble(times[M])
    g1 = cyl.g_hat(times[M], op.centers)
    a_m[M] = a1[op.iface_face - 1]
    a_p[M] = a1[op.iface_face]
    ab = np.zeros((3, n))
    for m in range(M - 1, -1, -1):
        low0, dia0, upp0, c0, a0 = op.assemble(times[m])
        g0 = cyl.g_hat(times[m], op.centers)
        rhs = u + (1 - theta) * dt * _Operator.apply(low1, dia1, upp1, c1, u)
        rhs += theta * dt * c0 - dt * (theta * g0 + (1 - theta) * g1)
        ab[0, 1:] = -theta * dt * upp0[:-1]
        ab[1] = 1.0 - theta * dt * dia0
        ab[2, :-1] = -theta * dt * low0[1:]
        u = solve_banded((1, 1), ab, rhs, check_finite=False)
        if not np.all(np.isfinite(u)):
            raise PDEError("non-finite values in the linear solve")
        u_cells[m] = u
        a_m[m] = a0[op.iface_face - 1]
        a_p[m] = a0[op.iface_face]
        low1, dia1, upp1, c1, g1 = low0, dia0, upp0, c0, g0
    # node values: edges, centres, interfaces
    nodes = np.concatenate([[lo], op.centers, iface_x, [hi]])
    order = np.argsort(nodes, kind="stable")
    nodes = nodes[order]
    ui = (a_m * u_cells[:, op.iface_face - 1] + a_p * u_cells[:, op.iface_face]) / (a_m + a_p)
    vals = np.concatenate([np.full((M + 1, 1), bc[0]), u_cells, ui, np.full((M + 1, 1), bc[1])], axis=1)
    return GridSolution(nodes, times, vals[:, order], float(L), n, M, float(theta), h, lo, hi,
                        iface_x, u_cells, a_m, a_p, op.iface_face - 1, cyl)


def evaluate_u(solution: GridSolution, t, x):
    """``u(t, x) = u_hat(t, Psi(t, x))`` by piecewise-linear interpolation.

    Interfaces are interpolation nodes, so no stencil straddles one in space.
    """
    T = solution.times[-1]
    if not 0.0 <= t <= T:
        raise PDEError(f"t outside [0, {T}]")
    scalar = np.ndim(x) == 0
    xh = np.atleast_1d(solution.pde.st.Psi(t, np.asarray(x, dtype=float)))
    if np.any(xh < solution.lo - 1e-12) or np.any(xh > solution.hi + 1e-12):
        raise PDEError("point outside the computational box")
    M = solution.M
    pos = t / T * M
    m = min(int(math.floor(pos)), M - 1)
    w = pos - m
    v0 = np.interp(xh, solution.nodes, solution.u[m])
    out = v0 if w == 0 else (1 - w) * v0 + w * np.interp(xh, solution.nodes, solution.u[m + 1])
    return float(out[0]) if scalar else out


@dataclass
class ConvergenceReport:
    mode: str
    N: list
    M: list
    errors: list
    orders: list
    exact: bool


def convergence_study(pde, levels: int = 3, N0: int = 100, M0: int = 100, mode: str = "both",
                      theta: float = 0.5, L: float = 10.0, exact=None, points=None, t: float = 0.0,
                      fixed_N: int | None = None, fixed_M: int | None = None) -> ConvergenceReport:
    """Observed orders under refinement by 2.

    ``mode`` is ``"space"`` (M fixed), ``"time"`` (N fixed) or ``"both"``.
    With ``exact(t, x)`` the errors are true max errors at ``points``;
    otherwise successive differences.
    """
    if levels < 3:
        raise PDEError("levels must be >= 3")
    if mode not in ("space", "time", "both"):
        raise PDEError("mode must be space, time or both")
    if points is None:
        points = np.linspace(-L / 2, L / 2, 201)
    Ns, Ms, vals = [], [], []
    for lv in range(levels):
        N = N0 * 2 ** lv if mode != "time" else (fixed_N or N0)
        M = M0 * 2 ** lv if mode != "space" else (fixed_M or M0)
        sol = solve(pde, L=L, N=N, M=M, theta=theta)
        Ns.append(N)
        Ms.append(M)
        vals.append(evaluate_u(sol, t, points))
    if exact is not None:
        ref = exact(t, points)
        errs = [float(np.max(np.abs(v - ref))) for v in vals]
    else:
        errs = [float(np.max(np.abs(vals[k] - vals[k + 1]))) for k in range(levels - 1)]
    orders = [math.log2(errs[k] / errs[k + 1]) if errs[k + 1] > 0 else math.inf
              for k in range(len(errs) - 1)]
    return ConvergenceReport(mode, Ns, Ms, errs, orders, exact is not None)
