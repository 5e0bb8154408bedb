"""Piecewise space-time coefficients, skewness schedules and hypothesis checks.

Every coefficient piece comes from a closed catalog with analytic partial
derivatives, so the sampled hypothesis checks use exact derivative values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import CurveFamily, default_tol, subdomain_index

SIDES = ("left", "right", "symmetric")


class CoefficientError(ValueError):
    pass


# name -> number of params
PIECE_KINDS = {
    "constant": 1,    # c
    "affine": 3,      # c0 + cx*x + ct*t
    "product": 4,     # (a0 + a1*t) * (b0 + b1*x)
    "sinusoid_t": 4,  # c0 + amp*sin(freq*t + phase)
    "sinusoid_x": 4,  # c0 + amp*sin(freq*x + phase)
    "arctan": 3,      # c0 + amp*arctan(scale*x)
}


@dataclass(frozen=True)
class CatalogFunction:
    """A smooth function of ``(t, x)`` with exact first derivatives."""

    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind not in PIECE_KINDS:
            raise CoefficientError(f"unknown coefficient kind {self.kind!r}")
        params = tuple(float(p) for p in self.params)
        if len(params) != PIECE_KINDS[self.kind]:
            raise CoefficientError(
                f"kind {self.kind!r} takes {PIECE_KINDS[self.kind]} params, got {len(params)}"
            )
        object.__setattr__(self, "params", params)

    def __call__(self, t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        p = self.params
        k = self.kind
        if k == "constant":
            out = np.full(np.broadcast(t, x).shape, p[0])
        elif k == "affine":
            out = p[0] + p[1] * x + p[2] * t
        elif k == "product":
            out = (p[0] + p[1] * t) * (p[2] + p[3] * x)
        elif k == "sinusoid_t":
            out = p[0] + p[1] * np.sin(p[2] * t + p[3]) + 0.0 * x
        elif k == "sinusoid_x":
            out = p[0] + p[1] * np.sin(p[2] * x + p[3]) + 0.0 * t
        else:
            out = p[0] + p[1] * np.arctan(p[2] * x) + 0.0 * t
        return out

    def dx(self, t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        p = self.params
        k = self.kind
        shape = np.broadcast(t, x).shape
        if k in ("constant", "sinusoid_t"):
            return np.zeros(shape)
        if k == "affine":
            return np.full(shape, p[1])
        if k == "product":
            return (p[0] + p[1] * t) * p[3] + 0.0 * x
        if k == "sinusoid_x":
            return p[1] * p[2] * np.cos(p[2] * x + p[3]) + 0.0 * t
        return p[1] * p[2] / (1.0 + (p[2] * x) ** 2) + 0.0 * t

    def dt(self, t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        p = self.params
        k = self.kind
        shape = np.broadcast(t, x).shape
        if k in ("constant", "sinusoid_x", "arctan"):
            return np.zeros(shape)
        if k == "affine":
            return np.full(shape, p[2])
        if k == "product":
            return p[1] * (p[2] + p[3] * x) + 0.0 * t
        return p[1] * p[2] * np.cos(p[2] * t + p[3]) + 0.0 * x

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": list(self.params)}


def _as_catalog(piece) -> CatalogFunction:
    if isinstance(piece, CatalogFunction):
        return piece
    if callable(piece) and hasattr(piece, "dx") and hasattr(piece, "dt"):
        return piece
    if isinstance(piece, (int, float)):
        return CatalogFunction("constant", (float(piece),))
    if isinstance(piece, dict):
        return CatalogFunction(piece["kind"], tuple(piece["params"]))
    kind, params = piece
    return CatalogFunction(kind, tuple(params))


def evaluate_sided(pieces, family: CurveFamily, t, x, side: str = "symmetric", tol=None):
    """Evaluate a piecewise function given as one callable per subdomain.

    Off the interfaces all sides agree.  On interface ``i`` ``left`` uses
    piece ``i-1``, ``right`` piece ``i`` and ``symmetric`` their average.
    ``pieces`` are callables ``(t, x) -> array``.
    """
    if side not in SIDES:
        raise CoefficientError(f"side must be one of {SIDES}")
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    index, on = subdomain_index(family, t, x, tol)
    index = np.atleast_1d(index)
    on = np.atleast_1d(on)
    # on an interface, index already counts that curve => right piece
    left_idx = np.where(on > 0, on - 1, index)
    right_idx = np.where(on > 0, on, index)
    out = np.empty_like(x)
    if side in ("right", "symmetric"):
        vals_r = _gather_pieces(pieces, right_idx, t, x)
    if side in ("left", "symmetric"):
        vals_l = _gather_pieces(pieces, left_idx, t, x)
    if side == "right":
        out = vals_r
    elif side == "left":
        out = vals_l
    else:
        out = np.where(on > 0, 0.5 * (vals_l + vals_r), vals_r)
    return float(out[0]) if scalar else out


def _gather_pieces(pieces, idx, t, x):
    out = np.empty_like(x)
    t_arr = np.asarray(t, dtype=float)
    for k in np.unique(idx):
        mask = idx == k
        tk = t_arr if t_arr.ndim == 0 else t_arr[mask]
        out[mask] = pieces[int(k)](tk, x[mask])
    return out


@dataclass(frozen=True)
class PiecewiseCoefficient:
    """A coefficient with one catalog piece per subdomain ``D_0..D_I``.

    ``lower``/``upper`` are the declared bounds ``m, M``: a diffusion
    coefficient must satisfy ``0 < m <= value <= M`` and a drift
    ``|value| <= M`` (set ``lower=None``).
    """

    family: CurveFamily
    pieces: tuple
    lower: float | None = None
    upper: float | None = None

    def __post_init__(self):
        pieces = tuple(_as_catalog(p) for p in self.pieces)
        if len(pieces) == 1:
            pieces = pieces * (self.family.n_interfaces + 1)
        if len(pieces) != self.family.n_interfaces + 1:
            raise CoefficientError(
                f"need {self.family.n_interfaces + 1} pieces (one per subdomain), got {len(pieces)}"
            )
        object.__setattr__(self, "pieces", pieces)
        uniform = None
        if all(isinstance(p, CatalogFunction) and p.kind == "constant" for p in pieces):
            if len({p.params[0] for p in pieces}) == 1:
                uniform = pieces[0].params[0]
        object.__setattr__(self, "_uniform", uniform)

    @classmethod
    def constant(cls, family, value, lower=None, upper=None):
        return cls(family, (CatalogFunction("constant", (value,)),), lower, upper)

    def __call__(self, t, x, side: str = "symmetric", tol=None):
        if self._uniform is not None:
            if np.ndim(x) == 0:
                return float(self._uniform)
            return np.full(np.shape(x), self._uniform)
        return evaluate_sided(self.pieces, self.family, t, x, side, tol)

    def dx(self, t, x, side: str = "symmetric"):
        return evaluate_sided([p.dx for p in self.pieces], self.family, t, x, side)

    def dt(self, t, x, side: str = "symmetric"):
        return evaluate_sided([p.dt for p in self.pieces], self.family, t, x, side)

    def jump(self, t, i: int):
        """Half jump ``(f(x_i+) - f(x_i-))/2`` at interface ``i`` (1-based)."""
        xi = self.family.curves[i - 1].value(t)
        return 0.5 * (self.pieces[i](t, xi) - self.pieces[i - 1](t, xi))

    def is_constant(self) -> bool:
        return all(getattr(p, "kind", None) == "constant" for p in self.pieces)


def eval_one_sided(coef, t, x, side: str = "symmetric"):
    return coef(t, x, side)


def _sample_subdomain(family: CurveFamily, n_t: int, n_x: int, window: float):
    """Sample points strictly inside each subdomain, per time."""
    ts = np.linspace(0.0, family.T, n_t)
    xs = family.positions(ts)  # (n_t, I)
    lo = xs.min() - window
    hi = xs.max() + window
    samples = []
    u = (np.arange(n_x) + 0.5) / n_x
    for k in range(family.n_interfaces + 1):
        left = xs[:, k - 1] if k > 0 else np.full(n_t, lo)
        right = xs[:, k] if k < family.n_interfaces else np.full(n_t, hi)
        tt = np.repeat(ts, n_x)
        xx = (left[:, None] + (right - left)[:, None] * u[None, :]).ravel()
        samples.append((tt, xx))
    return samples


@dataclass
class HypothesisReport:
    passed: bool
    sup_dx: list
    sup_dt: list
    bound: float

    def __bool__(self):
        return self.passed


def check_H_hypothesis(coef: PiecewiseCoefficient, n_t: int = 41, n_x: int = 41,
                       bound: float = 1e6, window: float = 5.0) -> HypothesisReport:
    """Sampled sup of ``|d_x coef|`` and ``|d_t coef|`` on each subdomain.

    Unbounded subdomains are truncated to ``window`` beyond the outermost
    curve.
    """
    if n_t < 2 or n_x < 2:
        raise CoefficientError("sample counts must be >= 2")
    sup_dx, sup_dt = [], []
    for k, (tt, xx) in enumerate(_sample_subdomain(coef.family, n_t, n_x, window)):
        piece = coef.pieces[k]
        sup_dx.append(float(np.abs(piece.dx(tt, xx)).max()))
        sup_dt.append(float(np.abs(piece.dt(tt, xx)).max()))
    ok = all(math.isfinite(v) and v <= bound for v in sup_dx + sup_dt)
    return HypothesisReport(ok, sup_dx, sup_dt, bound)


@dataclass
class AJReport:
    passed: bool
    C_star: float
    per_interface: list  # (max_jump, integral) pairs

    def __bool__(self):
        return self.passed


def check_AJ_hypothesis(coef: PiecewiseCoefficient, n_t: int = 401) -> AJReport:
    """Smallest admissible average-jump constant, up to trapezoid quadrature.

    For each interface ``J_i(t) = |sigma^2(t, x_i+) - sigma^2(t, x_i-)|``;
    ``C* = max_i max_t J_i(t) * T / int_0^T J_i``.  Interfaces with no jump
    at all are vacuous.
    """
    if n_t < 2:
        raise CoefficientError("n_t must be >= 2")
    fam = coef.family
    ts = np.linspace(0.0, fam.T, n_t)
    c_star = 0.0
    ok = True
    per = []
    for i in range(1, fam.n_interfaces + 1):
        xi = fam.curves[i - 1].value(ts)
        jump = np.abs(coef.pieces[i](ts, xi) ** 2 - coef.pieces[i - 1](ts, xi) ** 2)
        integral = float(np.trapezoid(jump, ts))
        jmax = float(jump.max())
        per.append((jmax, integral))
        if jmax == 0.0:
            continue
        if integral <= 0.0:
            ok = False
            c_star = math.inf
            continue
        c_star = max(c_star, jmax * fam.T / integral)
    return AJReport(ok and math.isfinite(c_star), c_star if per else 0.0, per)


def check_bounds(coef: PiecewiseCoefficient, n_t: int = 41, n_x: int = 41,
                 window: float = 5.0, diffusion: bool = True):
    """Sampled check of the Theta(m, M) / Xi(M) class membership."""
    vals = []
    for k, (tt, xx) in enumerate(_sample_subdomain(coef.family, n_t, n_x, window)):
        vals.append(coef.pieces[k](tt, xx))
        # interface traces from both sides
        for i in (k, k + 1):
            if 1 <= i <= coef.family.n_interfaces:
                ts = np.linspace(0.0, coef.family.T, n_t)
                vals.append(coef.pieces[k](ts, coef.family.curves[i - 1].value(ts)))
    v = np.concatenate([np.ravel(a) for a in vals])
    if diffusion:
        lo = coef.lower if coef.lower is not None else 0.0
        ok = bool(np.all(v > 0) and v.min() >= lo and (coef.upper is None or v.max() <= coef.upper))
    else:
        ok = coef.upper is None or bool(np.abs(v).max() <= coef.upper)
    return ok, float(v.min()), float(v.max())


BETA_KINDS = {"constant": 1, "affine": 2, "sinusoid": 4}


@dataclass(frozen=True)
class BetaFunction:
    """``constant(c)``, ``affine(c0, c1)`` or ``sinusoid(c0, amp, freq, phase)`` in t."""

    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind not in BETA_KINDS:
            raise CoefficientError(f"unknown beta kind {self.kind!r}")
        params = tuple(float(p) for p in self.params)
        if len(params) != BETA_KINDS[self.kind]:
            raise CoefficientError(f"beta kind {self.kind!r} takes {BETA_KINDS[self.kind]} params")
        object.__setattr__(self, "params", params)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        p = self.params
        if self.kind == "constant":
            out = np.full_like(t, p[0])
        elif self.kind == "affine":
            out = p[0] + p[1] * t
        else:
            out = p[0] + p[1] * np.sin(p[2] * t + p[3])
        return out if out.ndim else float(out)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        p = self.params
        if self.kind == "constant":
            out = np.zeros_like(t)
        elif self.kind == "affine":
            out = np.full_like(t, p[1])
        else:
            out = p[1] * p[2] * np.cos(p[2] * t + p[3])
        return out if out.ndim else float(out)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": list(self.params)}


@dataclass(frozen=True)
class SkewnessSchedule:
    """Per-interface skewness ``beta_i(t)`` valued in ``[k, kappa]``, ``-1 < k <= kappa < 1``."""

    functions: tuple
    T: float
    n_check: int = 401
    k: float = field(init=False)
    kappa: float = field(init=False)
    M_beta: float = field(init=False)

    def __post_init__(self):
        fns = []
        for f in self.functions:
            if isinstance(f, BetaFunction):
                fns.append(f)
            elif isinstance(f, (int, float)):
                fns.append(BetaFunction("constant", (float(f),)))
            elif isinstance(f, dict):
                fns.append(BetaFunction(f["kind"], tuple(f["params"])))
            else:
                fns.append(BetaFunction(f[0], tuple(f[1])))
        object.__setattr__(self, "functions", tuple(fns))
        ts = np.linspace(0.0, self.T, self.n_check)
        vals = np.array([f(ts) for f in fns])
        ders = np.array([f.derivative(ts) for f in fns])
        lo, hi = float(vals.min()), float(vals.max())
        if not (-1.0 < lo and hi < 1.0):
            raise CoefficientError(f"beta out of (-1, 1): sampled range [{lo}, {hi}]")
        object.__setattr__(self, "k", lo)
        object.__setattr__(self, "kappa", hi)
        object.__setattr__(self, "M_beta", float(np.abs(ders).max()))

    @classmethod
    def constant(cls, values: Sequence[float], T: float):
        return cls(tuple(BetaFunction("constant", (float(v),)) for v in values), T)

    @property
    def n_interfaces(self) -> int:
        return len(self.functions)

    def value(self, i: int, t):
        if not 1 <= i <= self.n_interfaces:
            raise CoefficientError(f"interface index {i} out of range")
        self._check_t(t)
        return self.functions[i - 1](t)

    def derivative(self, i: int, t):
        if not 1 <= i <= self.n_interfaces:
            raise CoefficientError(f"interface index {i} out of range")
        self._check_t(t)
        return self.functions[i - 1].derivative(t)

    def values(self, t):
        """All ``beta_i(t)``, shape ``(I,)`` or ``(n, I)``."""
        return np.stack([np.asarray(f(t), dtype=float) for f in self.functions], axis=-1)

    def derivatives(self, t):
        return np.stack([np.asarray(f.derivative(t), dtype=float) for f in self.functions], axis=-1)

    def _check_t(self, t):
        t = np.asarray(t)
        if np.any(t < 0) or np.any(t > self.T):
            raise CoefficientError(f"time outside [0, {self.T}]")

    def is_zero(self) -> bool:
        return all(f.kind == "constant" and f.params[0] == 0.0 for f in self.functions)


def eval_beta(schedule: SkewnessSchedule, i: int, t):
    return schedule.value(i, t)


def eval_beta_derivative(schedule: SkewnessSchedule, i: int, t):
    return schedule.derivative(i, t)


@dataclass(frozen=True)
class ProblemSpec:
    """``dX = sigma dW + b dt + sum_i beta_i(t) dL^{x_i}(X)``, ``X_0 = x0`` on ``[0, T]``."""

    sigma: PiecewiseCoefficient
    b: PiecewiseCoefficient
    beta: SkewnessSchedule
    family: CurveFamily
    x0: float = 0.0

    def __post_init__(self):
        fam = self.family
        if self.sigma.family != fam or self.b.family != fam:
            raise CoefficientError("sigma and b must share the problem's curve family")
        if self.beta.n_interfaces != fam.n_interfaces:
            raise CoefficientError("one beta function per interface is required")
        if self.beta.T != fam.T:
            raise CoefficientError("beta schedule horizon differs from the family's")

    @property
    def T(self) -> float:
        return self.family.T

    @classmethod
    def skew_bm(cls, beta=1 / 3, x0: float = 0.0, T: float = 1.0, position: float = 0.0):
        """Constant-skew Brownian motion across one static interface."""
        fam = CurveFamily.static([position], T, gap=1.0)
        return cls(
            PiecewiseCoefficient.constant(fam, 1.0, 1.0, 1.0),
            PiecewiseCoefficient.constant(fam, 0.0, None, 0.0),
            SkewnessSchedule.constant([beta], T),
            fam,
            x0,
        )

    def with_beta(self, beta: SkewnessSchedule) -> "ProblemSpec":
        return ProblemSpec(self.sigma, self.b, beta, self.family, self.x0)

    def with_start(self, x0: float) -> "ProblemSpec":
        return ProblemSpec(self.sigma, self.b, self.beta, self.family, x0)


@dataclass
class ProblemCheck:
    passed: bool
    messages: list

    def __bool__(self):
        return self.passed


def validate_problem(problem: ProblemSpec, n_samples: int = 201) -> ProblemCheck:
    """Run the standing-hypothesis checks that gate simulation."""
    from .geometry import validate_family

    msgs = []
    fam_report = validate_family(problem.family, n_samples)
    if not fam_report.passed:
        msgs.append(f"curves violate ordering: min gap {fam_report.min_gap} < {fam_report.declared_gap}")
    ok_s, lo_s, hi_s = check_bounds(problem.sigma, diffusion=True)
    if not ok_s:
        msgs.append(f"sigma outside Theta(m, M): sampled range [{lo_s}, {hi_s}]")
    ok_b, _, hi_b = check_bounds(problem.b, diffusion=False)
    if not ok_b:
        msgs.append(f"b outside Xi(M): sampled max |b| = {hi_b}")
    h = check_H_hypothesis(problem.sigma)
    if not h.passed:
        msgs.append(f"sigma fails the regularity check (sup|d sigma| above {h.bound})")
    aj = check_AJ_hypothesis(problem.sigma)
    if not aj.passed:
        msgs.append("sigma^2 jumps fail the average-jump check")
    return ProblemCheck(not msgs, msgs)
