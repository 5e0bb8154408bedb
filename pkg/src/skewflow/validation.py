"""Monte Carlo cross-checks: Feynman--Kac vs the PDE, the evolution property,
the time-dependent Ito--Tanaka formula on curves, and generator martingales.

Every pass/fail decision is ``|estimate - target| <= z*se + eps`` with the
systematic allowance ``eps`` recorded in the returned report.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coefficients import ProblemSpec
from .pde_solver import TransmissionPDE, evaluate_u, solve
from .profiles import Profile
from .simulator import Observer, SimConfig, SimulationError, simulate


class ValidationError(ValueError):
    pass


def _steps_for(problem: ProblemSpec, n_steps: int, s: float, e: float | None = None) -> int:
    """Steps on ``[s, e]`` keeping the step size of ``n_steps`` on ``[0, T]``."""
    e = problem.T if e is None else e
    return max(1, int(round(n_steps * (e - s) / problem.T)))


def _mean_se(v: np.ndarray):
    v = np.asarray(v, dtype=float)
    n = v.size
    if n < 2:
        return float(v.mean()), math.inf
    sd = float(v.std(ddof=1))
    if np.all(v == v[0]):
        sd = 0.0
    return float(v.mean()), sd / math.sqrt(n)


# ---------------------------------------------------------------------------
# Feynman--Kac


class FKObserver(Observer):
    """Per-path ``f(X_T) e^{-lam (T-t)} - int_t^T g(s, X_s) e^{-lam (s-t)} ds`` (trapezoid)."""

    name = "fk"

    def __init__(self, lam: float, f: Profile, g: Profile):
        self.lam = float(lam)
        self.f = f
        self.g = g

    def bind(self, problem, times, n_paths):
        super().bind(problem, times, n_paths)
        self.values = np.zeros(n_paths)
        self.t0 = times[0]
        n = len(times) - 1
        w = np.empty(n + 1)
        w[0] = self.dt[0] / 2
        w[-1] = self.dt[-1] / 2
        w[1:-1] = (self.dt[:-1] + self.dt[1:]) / 2
        self.weights = w * np.exp(-self.lam * (times - self.t0))

    def update(self, sl, j, t, x):
        if not self.g.is_zero:
            self.values[sl] -= self.weights[j] * self.g(t, x)
        if j == len(self.times) - 1:
            self.values[sl] += self.f(x) * math.exp(-self.lam * (t - self.t0))

    def result(self):
        return self.values


@dataclass
class FKEstimate:
    point: tuple
    estimate: float
    std_error: float
    n_paths: int
    n_steps: int = 0


def feynman_kac_mc(problem: ProblemSpec, lam: float, f, g, point, n_paths: int, seed: int = 0,
                   n_steps: int = 800, stream: int = 0, threads: int | None = None) -> FKEstimate:
    """Monte Carlo value of the Feynman--Kac functional started at ``point = (t, x)``."""
    f = Profile.from_config(f)
    g = Profile.from_config(g)
    t, x = float(point[0]), float(point[1])
    n = _steps_for(problem, n_steps, t)
    obs = FKObserver(lam, f, g)
    simulate(problem, SimConfig(n_paths, n, seed, (t, x), record_every=None, stream=stream,
                                threads=threads), [obs])
    est, se = _mean_se(obs.result())
    return FKEstimate((t, x), est, se, n_paths, n)


@dataclass
class ComparisonReport:
    rows: list
    passed: bool
    tolerances: dict

    def summary(self) -> str:
        lines = [f"{'t':>6} {'x':>8} {'u_pde':>12} {'u_mc':>12} {'se':>10} {'gap':>11} {'tol':>10} pass"]
        for r in self.rows:
            lines.append(
                f"{r['t']:6.3f} {r['x']:8.3f} {r['u_pde']:12.6f} {r['u_mc']:12.6f} "
                f"{r['se']:10.2e} {r['gap']:11.3e} {r['tol']:10.3e} {r['pass']}"
            )
        lines.append(f"eps_grid = {self.tolerances['eps_grid']:.3e}; overall {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t,x,u_pde,u_mc,se,gap,tol,pass\n")
            for r in self.rows:
                fh.write(
                    f"{r['t']:.17g},{r['x']:.17g},{r['u_pde']:.17g},{r['u_mc']:.17g},"
                    f"{r['se']:.17g},{r['gap']:.17g},{r['tol']:.17g},{int(r['pass'])}\n"
                )


def compare_fk(problem: ProblemSpec, lam: float, f, g, points, mc: dict | None = None,
               pde: dict | None = None, pde_problem: ProblemSpec | None = None,
               z: float = 3.0, C: float = 5.0) -> ComparisonReport:
    """PDE value vs Monte Carlo at each point; pass iff ``|gap| <= z*se + C*(h^2 + dt)``.

    ``mc`` keys: ``n_paths, n_steps, seed, threads``; ``pde`` keys:
    ``L, N, M, theta``.  ``pde_problem`` (default ``problem``) lets a
    deliberately mismatched problem feed the PDE side.
    """
    mc = {"n_paths": 200_000, "n_steps": 800, "seed": 0, "threads": None, **(mc or {})}
    pde = {"L": 10.0, "N": 800, "M": 800, "theta": 0.5, **(pde or {})}
    f = Profile.from_config(f)
    g = Profile.from_config(g)
    sol = solve(TransmissionPDE(pde_problem or problem, lam, f, g), **pde)
    dt = max(problem.T / pde["M"], problem.T / mc["n_steps"])
    eps = C * (sol.h ** 2 + dt)
    rows = []
    for k, (t, x) in enumerate(points):
        est = feynman_kac_mc(problem, lam, f, g, (t, x), mc["n_paths"], mc["seed"],
                             mc["n_steps"], stream=k, threads=mc["threads"])
        u = evaluate_u(sol, t, x)
        gap = u - est.estimate
        tol = z * est.std_error + eps
        rows.append({"t": t, "x": x, "u_pde": u, "u_mc": est.estimate, "se": est.std_error,
                     "gap": gap, "tol": tol, "pass": abs(gap) <= tol})
    return ComparisonReport(rows, all(r["pass"] for r in rows),
                            {"z": z, "C": C, "h": sol.h, "dt": dt, "eps_grid": eps})


# ---------------------------------------------------------------------------
# Chapman--Kolmogorov


@dataclass
class CKReport:
    direct: float
    direct_se: float
    two_stage: float
    two_stage_se: float
    defect: float
    combined_se: float
    passed: bool
    nodes: np.ndarray = field(repr=False, default=None)


def chapman_kolmogorov_test(problem: ProblemSpec, s: float, u: float, t: float, phi,
                            n_paths: int = 200_000, n_steps: int = 1000, seed: int = 0,
                            x: float | None = None, node_spacing: float = 0.1,
                            inner_paths: int = 10_000, z: float = 3.0) -> CKReport:
    """``E^{s,x} phi(X_t)`` directly and through ``E^{s,x}[E^{u,X_u} phi(X_t)]``.

    The inner expectation is computed on a grid of start points (spacing
    ``node_spacing``, always including the interface positions at time
    ``u``) and interpolated linearly.  All three ensembles use independent
    streams and the same step size.
    """
    if not (0 <= s < u < t <= problem.T):
        raise ValidationError("need 0 <= s < u < t <= T")
    phi = Profile.from_config(phi)
    x = problem.x0 if x is None else float(x)
    nd = _steps_for(problem, n_steps, s, t)
    d = simulate(problem, SimConfig(n_paths, nd, seed, (s, x), record_every=None, stream=0, end=t))
    direct, dse = _mean_se(phi(d.terminal))
    no = _steps_for(problem, n_steps, s, u)
    o = simulate(problem, SimConfig(n_paths, no, seed, (s, x), record_every=None, stream=1, end=u))
    xu = o.terminal
    # beyond the extreme quantiles np.interp clamps to the end nodes
    lo, hi = (float(v) for v in np.quantile(xu, [1e-4, 1 - 1e-4]))
    nodes = np.arange(math.floor(lo / node_spacing), math.ceil(hi / node_spacing) + 1) * node_spacing
    curves = np.atleast_1d(problem.family.positions(u))
    nodes = np.unique(np.concatenate([nodes, curves[(curves > nodes[0]) & (curves < nodes[-1])]]))
    ni = _steps_for(problem, n_steps, u, t)
    starts = np.repeat(nodes, inner_paths)
    inner = simulate(problem, SimConfig(len(starts), ni, seed, (u, starts), record_every=None,
                                        stream=2, end=t))
    vals = phi(inner.terminal).reshape(len(nodes), inner_paths)
    v = vals.mean(axis=1)
    if np.all(vals == vals.flat[0]):
        vse = np.zeros(len(nodes))
    else:
        vse = vals.std(axis=1, ddof=1) / math.sqrt(inner_paths)
    interp = np.interp(xu, nodes, v)
    two, ose = _mean_se(interp)
    # mean interpolation weight per node
    k = np.clip(np.searchsorted(nodes, xu, side="right") - 1, 0, len(nodes) - 2)
    w = (xu - nodes[k]) / (nodes[k + 1] - nodes[k])
    wbar = np.bincount(k, 1 - w, len(nodes)) + np.bincount(k + 1, w, len(nodes))
    wbar /= len(xu)
    tse = math.sqrt(ose ** 2 + float(np.sum((wbar * vse) ** 2)))
    comb = math.sqrt(dse ** 2 + tse ** 2)
    defect = abs(direct - two)
    return CKReport(direct, dse, two, tse, defect, comb, defect <= z * comb, nodes)


# ---------------------------------------------------------------------------
# Ito--Tanaka on a curve


@dataclass(frozen=True)
class CurveFunction:
    """Test function ``r(t, x)``, smooth off the curve ``gamma``.

    Kinds: ``abs`` ``c*|x - gamma(t)|``; ``smooth`` ``c*(x - gamma(t))**2``;
    ``time`` ``c*t`` (x-independent).  ``gamma(t) = g0 + g1*sin(g2*t)``.
    """

    kind: str
    c: float = 1.0
    gamma: tuple = (0.0, 0.0, 1.0)

    def curve(self, t):
        g0, g1, g2 = self.gamma
        return g0 + g1 * np.sin(g2 * np.asarray(t, dtype=float))

    def curve_dt(self, t):
        g0, g1, g2 = self.gamma
        return g1 * g2 * np.cos(g2 * np.asarray(t, dtype=float))

    def value(self, t, x):
        z = x - self.curve(t)
        if self.kind == "abs":
            return self.c * np.abs(z)
        if self.kind == "smooth":
            return self.c * z ** 2
        if self.kind == "time":
            return self.c * t + 0.0 * x
        raise ValidationError(f"unknown curve-function kind {self.kind!r}")

    def derivs(self, t, x):
        """Symmetric ``(r_t, r_x, r_xx)`` off the curve and the jump of ``r_x`` on it."""
        z = x - self.curve(t)
        gd = self.curve_dt(t)
        if self.kind == "abs":
            s = np.sign(z)
            return -gd * s * self.c, s * self.c, 0.0 * z, 2.0 * self.c
        if self.kind == "smooth":
            return -2 * gd * z * self.c, 2 * z * self.c, 2.0 * self.c + 0.0 * z, 0.0
        if self.kind == "time":
            return self.c + 0.0 * z, 0.0 * z, 0.0 * z, 0.0
        raise ValidationError(f"unknown curve-function kind {self.kind!r}")


class PeskirObserver(Observer):
    """Per-path residual of the Ito--Tanaka formula on the curve of ``fn``.

    The local-time term uses ``(1/2eps) sum 1{|X - gamma| < eps} sigma^2 dt``;
    with ``richardson=True`` it uses ``2 L_{eps/2} - L_eps`` instead, which
    removes the leading O(eps) bias of the occupation estimate.
    """

    name = "peskir"

    def __init__(self, fn: CurveFunction, epsilon: float, richardson: bool = False):
        if not epsilon > 0:
            raise ValidationError("epsilon must be positive")
        self.fn = fn
        self.epsilon = epsilon
        self.richardson = richardson

    def bind(self, problem, times, n_paths):
        super().bind(problem, times, n_paths)
        self.smooth = np.zeros(n_paths)
        self.lt = np.zeros(n_paths)
        self.lt_half = np.zeros(n_paths)
        self.r0 = np.zeros(n_paths)
        self.rT = np.zeros(n_paths)
        self._prev_x = np.zeros(n_paths)
        self._prev_rx = np.zeros(n_paths)

    def update(self, sl, j, t, x):
        fn = self.fn
        n = len(self.times) - 1
        if j > 0:
            self.smooth[sl] += self._prev_rx[sl] * (x - self._prev_x[sl])
        if j == 0:
            self.r0[sl] = fn.value(t, x)
        if j == n:
            self.rT[sl] = fn.value(t, x)
            return
        dt = self.dt[j]
        rt, rx, rxx, jump = fn.derivs(t, x)
        s2 = self.problem.sigma(t, x) ** 2
        self.smooth[sl] += rt * dt + 0.5 * rxx * s2 * dt
        if jump:
            z = np.abs(x - fn.curve(t))
            e = self.epsilon
            self.lt[sl] += 0.5 * jump * np.where(z < e, s2, 0.0) * dt / (2 * e)
            if self.richardson:
                self.lt_half[sl] += 0.5 * jump * np.where(z < e / 2, s2, 0.0) * dt / e
        self._prev_x[sl] = x
        self._prev_rx[sl] = rx

    def result(self):
        lt = 2 * self.lt_half - self.lt if self.richardson else self.lt
        return self.rT - self.r0 - self.smooth - lt


@dataclass
class ResidualReport:
    mean: float
    std_error: float
    ci: tuple
    mean_abs: float
    tol: float
    passed: bool
    half_width: float


def ito_peskir_residual(problem: ProblemSpec, fn: CurveFunction, n_paths: int = 100_000,
                        n_steps: int = 2000, seed: int = 0, epsilon: float = 0.02,
                        richardson: bool = False, tol: float | None = None,
                        z: float = 1.96) -> ResidualReport:
    """Both sides of the curve Ito--Tanaka formula along simulated paths.

    Returns the mean residual with a ``z``-level CI.  Passes iff the CI
    contains 0 and the mean ``|residual|`` is at most ``tol`` (default
    ``5*sqrt(dt) + epsilon``).
    """
    obs = PeskirObserver(fn, epsilon, richardson)
    simulate(problem, SimConfig(n_paths, n_steps, seed, record_every=None), [obs])
    res = obs.result()
    m, se = _mean_se(res)
    hw = z * se
    if tol is None:
        tol = 5 * math.sqrt(problem.T / n_steps) + epsilon
    mean_abs = float(np.mean(np.abs(res)))
    ci = (m - hw, m + hw)
    return ResidualReport(m, se, ci, mean_abs, tol, ci[0] <= 0 <= ci[1] and mean_abs <= tol, hw)


# ---------------------------------------------------------------------------
# generator martingales


@dataclass(frozen=True)
class SXFunction:
    """Piecewise-quadratic ``phi(t, x) = w(t) * phi_k(t, x)`` on subdomain ``D_k``.

    ``phi_0 = v + p (x - x_1) + q (x - x_1)^2``; later pieces are fixed by
    continuity, ``(1+beta_i) phi'(x_i+) = (1-beta_i) phi'(x_i-)`` and
    continuity of the generator across each curve (exact for static curves;
    a moving curve adds a ``phi_t`` jump).  ``w(t) = 1 + w1*t``.
    With ``enforce=False`` the slope condition is dropped (slopes simply
    continue), which gives a negative control.
    """

    problem: ProblemSpec
    v: float = 0.0
    p: float = 1.0
    q: float = 0.0
    w1: float = 0.0
    enforce: bool = True

    def _pieces(self, t):
        pr = self.problem
        xs = np.atleast_1d(pr.family.positions(t))
        beta = np.atleast_1d(pr.beta.values(t))
        V, P, Q = [self.v], [self.p], [self.q]
        anchors = [xs[0]]
        for i, xi in enumerate(xs):
            d = xi - anchors[-1]
            val = V[-1] + P[-1] * d + Q[-1] * d * d
            slope = P[-1] + 2 * Q[-1] * d
            if self.enforce:
                kap = (1 - beta[i]) / (1 + beta[i])
                s_m = float(pr.sigma(t, xi, "left")) ** 2
                s_p = float(pr.sigma(t, xi, "right")) ** 2
                b_m = float(pr.b(t, xi, "left"))
                b_p = float(pr.b(t, xi, "right"))
                p_new = kap * slope
                q_new = (s_m * (Q[-1]) + b_m * slope - b_p * p_new) / s_p
            else:
                p_new, q_new = slope, Q[-1]
            V.append(val)
            P.append(p_new)
            Q.append(q_new)
            anchors.append(xi)
        return xs, np.array(anchors), np.array(V), np.array(P), np.array(Q)

    def _eval(self, t, x, what):
        xs, anc, V, P, Q = self._pieces(t)
        k = np.sum(xs <= np.asarray(x)[..., None], axis=-1)
        d = x - anc[k]
        w = 1 + self.w1 * t
        if what == "value":
            return w * (V[k] + P[k] * d + Q[k] * d * d)
        if what == "dx":
            return w * (P[k] + 2 * Q[k] * d)
        return w * 2 * Q[k]

    def value(self, t, x):
        return self._eval(t, x, "value")

    def generator(self, t, x, h: float = 1e-6):
        """``phi_t + sigma^2/2 phi'' + b phi'`` off the curves (``phi_t`` by central difference)."""
        T = self.problem.T
        lo, hi = max(t - h, 0.0), min(t + h, T)
        ft = (self.value(hi, x) - self.value(lo, x)) / (hi - lo)
        pr = self.problem
        return (ft + 0.5 * pr.sigma(t, x) ** 2 * self._eval(t, x, "dxx")
                + pr.b(t, x) * self._eval(t, x, "dx"))


class MartingaleObserver(Observer):
    """``phi(t_k, X_{t_k}) - phi(s, x) - int_s^{t_k} L phi du`` (trapezoid) at chosen steps."""

    name = "martingale"

    def __init__(self, fn: SXFunction, check_steps):
        self.fn = fn
        self.check_steps = list(check_steps)

    def bind(self, problem, times, n_paths):
        super().bind(problem, times, n_paths)
        self.integral = np.zeros(n_paths)
        self.phi0 = np.zeros(n_paths)
        self._prev_g = np.zeros(n_paths)
        self.out = np.zeros((n_paths, len(self.check_steps)))

    def update(self, sl, j, t, x):
        g = self.fn.generator(t, x)
        if j == 0:
            self.phi0[sl] = self.fn.value(t, x)
        else:
            self.integral[sl] += 0.5 * (self._prev_g[sl] + g) * self.dt[j - 1]
        self._prev_g[sl] = g
        if j in self.check_steps:
            k = self.check_steps.index(j)
            self.out[sl, k] = self.fn.value(t, x) - self.phi0[sl] - self.integral[sl]

    def result(self):
        return self.out


@dataclass
class DefectReport:
    rows: list
    passed: bool
    tolerances: dict


def martingale_defect(problem: ProblemSpec, fn: SXFunction, starts, check_times=(0.5, 1.0),
                      n_paths: int = 20_000, n_steps: int = 1000, seed: int = 0,
                      s: float = 0.0, z: float = 3.0, C: float = 5.0) -> DefectReport:
    """Estimated ``E^{s,x}[phi(t, X_t) - phi(s, x) - int_s^t L phi du]`` on a start grid.

    Passes iff each estimate lies within ``z*se + C*dt`` of 0.
    """
    n = _steps_for(problem, n_steps, s)
    dt = (problem.T - s) / n
    steps = [int(round((tc - s) / dt)) for tc in check_times]
    if any(k < 1 or k > n for k in steps):
        raise ValidationError("check times must lie in (s, T]")
    rows = []
    for idx, x in enumerate(starts):
        obs = MartingaleObserver(fn, steps)
        simulate(problem, SimConfig(n_paths, n, seed, (s, float(x)), record_every=None, stream=idx), [obs])
        out = obs.result()
        for k, tc in enumerate(check_times):
            m, se = _mean_se(out[:, k])
            tol = z * se + C * dt
            rows.append({"x": float(x), "t": tc, "defect": m, "se": se, "tol": tol,
                         "pass": abs(m) <= tol})
    return DefectReport(rows, all(r["pass"] for r in rows), {"z": z, "C": C, "dt": dt})
