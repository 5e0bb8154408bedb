"""Euler--Maruyama on the local-time-free transformed SDE, mapped back by ``r``.

The skew terms are never discretised: ``Y = R(t, X)`` solves an ordinary SDE
with bounded coefficients, ``Y`` is stepped, and ``X = r(t, Y)``.

Per-step statistics (local time, Feynman--Kac integrals, ...) are collected
by observers so that large ensembles need not be stored.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .coefficients import CoefficientError, ProblemSpec, validate_problem
from .rng import normals
from .transform import RemovalTransform, TransformedProblem

log = logging.getLogger(__name__)

SCHEMES = ("euler_transformed", "euler_direct")
_DEFAULT_THREADS = 1


def set_default_threads(n: int) -> None:
    """Worker cap used when a config leaves ``threads`` unset."""
    global _DEFAULT_THREADS
    if n < 1:
        raise SimulationError("threads must be >= 1")
    _DEFAULT_THREADS = int(n)


class SimulationError(ValueError):
    pass


@dataclass
class SimConfig:
    """Simulation parameters.

    ``start = (s, x)``; ``x=None`` means the problem's ``x0`` and an array
    gives one start position per path.  Every
    ``record_every``-th state is stored (``0`` stores only the endpoints,
    ``None`` stores nothing but the final state).  ``end`` stops the run
    before the horizon.
    """

    n_paths: int
    n_steps: int
    seed: int = 0
    start: tuple = (0.0, None)
    scheme: str = "euler_transformed"
    record_every: int | None = 1
    chunk_size: int = 1 << 16
    threads: int | None = None
    stream: int = 0
    end: float | None = None

    def __post_init__(self):
        if int(self.n_steps) < 1:
            raise SimulationError("n_steps must be >= 1")
        if int(self.n_paths) < 1:
            raise SimulationError("n_paths must be >= 1")
        if self.scheme not in SCHEMES:
            raise SimulationError(f"unknown scheme {self.scheme!r}")
        if self.threads is None:
            self.threads = _DEFAULT_THREADS
        if self.chunk_size < 1 or self.threads < 1:
            raise SimulationError("chunk_size and threads must be positive")
        # chunks aligned on Philox blocks
        self.chunk_size = max(4, self.chunk_size - self.chunk_size % 4)


@dataclass
class PathEnsemble:
    times: np.ndarray
    x_values: np.ndarray
    y_values: np.ndarray
    increments_seed: int
    steps: np.ndarray
    failed: np.ndarray
    problem: ProblemSpec = field(repr=False)
    config: SimConfig = field(repr=False)
    observers: dict = field(default_factory=dict, repr=False)

    @property
    def n_paths(self) -> int:
        return self.x_values.shape[0]

    @property
    def terminal(self) -> np.ndarray:
        return self.x_values[:, -1]

    def to_csv(self, path) -> None:
        """Header ``path,step,t,x,y``; one row per stored state."""
        n, m = self.x_values.shape
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("path,step,t,x,y\n")
            for p in range(n):
                for j in range(m):
                    fh.write(
                        f"{p},{self.steps[j]},{self.times[j]:.17g},"
                        f"{self.x_values[p, j]:.17g},{self.y_values[p, j]:.17g}\n"
                    )

    def to_binary(self, path) -> None:
        """Rows ``(path, step, t, x, y)`` as little-endian float64, row-major."""
        n, m = self.x_values.shape
        rows = np.empty((n, m, 5), dtype="<f8")
        rows[..., 0] = np.arange(n)[:, None]
        rows[..., 1] = self.steps[None, :]
        rows[..., 2] = self.times[None, :]
        rows[..., 3] = self.x_values
        rows[..., 4] = self.y_values
        rows.reshape(-1, 5).tofile(path)


class Observer:
    """Receives every state ``x`` (all paths of a chunk) at every grid time.

    ``bind`` is called once with the full time grid; ``update`` with a slice
    of path indices so that concurrent chunks write disjoint slots.
    """

    def bind(self, problem: ProblemSpec, times: np.ndarray, n_paths: int) -> None:
        self.problem = problem
        self.times = times
        self.dt = np.diff(times)

    def update(self, sl: slice, j: int, t: float, x: np.ndarray) -> None:
        raise NotImplementedError

    def result(self):
        raise NotImplementedError


class TerminalObserver(Observer):
    def bind(self, problem, times, n_paths):
        super().bind(problem, times, n_paths)
        self.values = np.empty(n_paths)

    def update(self, sl, j, t, x):
        if j == len(self.times) - 1:
            self.values[sl] = x

    def result(self):
        return self.values


def _curve_fn(problem: ProblemSpec, curve):
    if callable(curve):
        return curve
    c = problem.family.curves[int(curve) - 1]
    return c.value


class LocalTimeObserver(Observer):
    """Running estimate of the symmetric local time on a curve ``gamma``.

    ``qv="sigma"`` uses ``sigma^2 dt`` as the quadratic-variation increment,
    ``qv="increment"`` uses ``(dX)^2``.  ``curve`` is a 1-based interface id
    or a callable ``t -> gamma(t)``.
    """

    def __init__(self, curve, epsilon: float, qv: str = "sigma"):
        if not epsilon > 0:
            raise SimulationError("epsilon must be positive")
        if qv not in ("sigma", "increment"):
            raise SimulationError("qv must be 'sigma' or 'increment'")
        self.curve = curve
        self.epsilon = float(epsilon)
        self.qv = qv

    def bind(self, problem, times, n_paths):
        super().bind(problem, times, n_paths)
        self.gamma = _curve_fn(problem, self.curve)
        self.values = np.zeros(n_paths)
        self._prev_x = np.zeros(n_paths)
        self._prev_hit = np.zeros(n_paths, dtype=bool)

    def update(self, sl, j, t, x):
        n = len(self.times) - 1
        if self.qv == "sigma":
            if j < n:
                hit = np.abs(x - self.gamma(t)) < self.epsilon
                s2 = self.problem.sigma(t, x) ** 2
                self.values[sl] += np.where(hit, s2, 0.0) * self.dt[j] / (2 * self.epsilon)
            return
        if j > 0:
            dx2 = (x - self._prev_x[sl]) ** 2
            self.values[sl] += np.where(self._prev_hit[sl], dx2, 0.0) / (2 * self.epsilon)
        self._prev_x[sl] = x
        self._prev_hit[sl] = np.abs(x - self.gamma(t)) < self.epsilon

    def result(self):
        return self.values


def _transformed(problem: ProblemSpec) -> TransformedProblem:
    tr = RemovalTransform(problem.family, problem.beta)
    return TransformedProblem(tr, problem.sigma, problem.b, n_t=11)


def _grid(problem: ProblemSpec, cfg: SimConfig):
    s = float(cfg.start[0])
    e = problem.T if cfg.end is None else float(cfg.end)
    if not (0.0 <= s < e <= problem.T):
        raise SimulationError(f"need 0 <= start < end <= {problem.T}")
    return s + (e - s) * np.arange(cfg.n_steps + 1) / cfg.n_steps


def _record_steps(cfg: SimConfig) -> np.ndarray:
    n = cfg.n_steps
    if cfg.record_every is None:
        return np.array([n])
    if cfg.record_every == 0:
        return np.array([0, n])
    steps = np.arange(0, n + 1, cfg.record_every)
    if steps[-1] != n:
        steps = np.append(steps, n)
    return steps


def _check_problem(problem: ProblemSpec, cfg: SimConfig):
    check = validate_problem(problem)
    if not check.passed:
        raise CoefficientError("; ".join(check.messages))
    if cfg.scheme == "euler_direct" and not problem.beta.is_zero():
        raise SimulationError("euler_direct cannot represent skewness; use euler_transformed")


def _run_chunk(problem, tp, cfg, times, rec_steps, p0, p1, x_start, observers, out_x, out_y, failed):
    n = p1 - p0
    sl = slice(p0, p1)
    sqdt = np.sqrt(np.diff(times))
    dt = np.diff(times)
    if np.ndim(x_start):
        x = np.array(x_start[p0:p1], dtype=float)
    else:
        x = np.full(n, x_start, dtype=float)
    direct = cfg.scheme == "euler_direct"
    y = x.copy() if direct else tp.transform.at(times[0]).R(x)
    bad = np.zeros(n, dtype=bool)
    rec_pos = {int(s): k for k, s in enumerate(rec_steps)}
    for j in range(cfg.n_steps + 1):
        t = times[j]
        if direct:
            x = y
            sb = problem.sigma(t, y)
            bb = problem.b(t, y)
        else:
            sb, bb, x = tp.coefficients(t, y)
        for obs in observers:
            obs.update(sl, j, t, x)
        k = rec_pos.get(j)
        if k is not None:
            out_x[sl, k] = x
            out_y[sl, k] = y
        if j == cfg.n_steps:
            break
        z = normals(cfg.seed, j, p0, p1, cfg.stream)
        y_new = y + sb * sqdt[j] * z + bb * dt[j]
        nf = ~np.isfinite(y_new)
        if nf.any():
            bad |= nf
            y_new = np.where(bad, y, y_new)
        y = y_new
    failed[sl] = bad


def simulate(problem: ProblemSpec, config: SimConfig, observers=(), check: bool = True) -> PathEnsemble:
    """Simulate ``config.n_paths`` paths of the skew SDE.

    Parameters
    ----------
    problem : ProblemSpec
    config : SimConfig
    observers : sequence of Observer, optional
        Per-step accumulators; results land in ``ensemble.observers`` keyed
        by position (and by ``obs.name`` if set).
    check : bool
        Run the coefficient validators first.

    Returns
    -------
    PathEnsemble
    """
    if check:
        _check_problem(problem, config)
    times = _grid(problem, config)
    x_start = config.start[1]
    if x_start is None:
        x_start = problem.x0
    elif np.ndim(x_start):
        x_start = np.asarray(x_start, dtype=float)
        if x_start.shape != (config.n_paths,):
            raise SimulationError("per-path start positions need shape (n_paths,)")
    else:
        x_start = float(x_start)
    rec_steps = _record_steps(config)
    n = config.n_paths
    out_x = np.empty((n, len(rec_steps)))
    out_y = np.empty((n, len(rec_steps)))
    failed = np.zeros(n, dtype=bool)
    observers = list(observers)
    for obs in observers:
        obs.bind(problem, times, n)
    tp = None if config.scheme == "euler_direct" else _transformed(problem)
    bounds = [(p, min(p + config.chunk_size, n)) for p in range(0, n, config.chunk_size)]

    def job(b):
        _run_chunk(problem, tp, config, times, rec_steps, b[0], b[1], x_start,
                   observers, out_x, out_y, failed)

    if config.threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            list(pool.map(job, bounds))
    else:
        for b in bounds:
            job(b)
    if failed.any():
        log.warning("%d paths aborted on non-finite states", int(failed.sum()))
    results = {}
    for k, obs in enumerate(observers):
        results[k] = obs.result()
        name = getattr(obs, "name", None)
        if name:
            results[name] = results[k]
    return PathEnsemble(times[rec_steps], out_x, out_y, config.seed, rec_steps,
                        failed, problem, config, results)


def estimate_local_time(ensemble: PathEnsemble, curve_index, epsilon: float, qv: str = "sigma"):
    """Cumulative local-time estimate on the stored grid, shape ``(n_paths, n_times)``.

    ``curve_index`` is a 1-based interface id or a callable ``t -> gamma(t)``.
    Resolution is that of the stored grid, so store every step for accuracy.
    """
    if not epsilon > 0:
        raise SimulationError("epsilon must be positive")
    if qv not in ("sigma", "increment"):
        raise SimulationError("qv must be 'sigma' or 'increment'")
    problem = ensemble.problem
    gamma = _curve_fn(problem, curve_index)
    times = ensemble.times
    x = ensemble.x_values
    out = np.zeros_like(x)
    for j in range(len(times) - 1):
        t = times[j]
        hit = np.abs(x[:, j] - gamma(t)) < epsilon
        if qv == "sigma":
            inc = problem.sigma(t, x[:, j]) ** 2 * (times[j + 1] - t)
        else:
            inc = (x[:, j + 1] - x[:, j]) ** 2
        out[:, j + 1] = out[:, j] + np.where(hit, inc, 0.0) / (2 * epsilon)
    return out


def interface_occupation(ensemble: PathEnsemble, tol: float) -> float:
    """Fraction of stored (path, time) pairs within ``tol`` of some interface."""
    if not tol > 0:
        raise SimulationError("tol must be positive")
    xs = ensemble.problem.family.positions(ensemble.times)  # (m, I)
    d = np.abs(ensemble.x_values[:, :, None] - xs[None, :, :]).min(axis=-1)
    return float(np.mean(d <= tol))


@dataclass
class StrongErrorReport:
    steps: list
    rms: list
    orders: list

    def monotone(self, slack: float = 0.10) -> bool:
        """Nonincreasing RMS sequence, allowing one inversion within ``slack``."""
        inversions = 0
        for a, b in zip(self.rms, self.rms[1:]):
            if b > a:
                if b > a * (1 + slack):
                    return False
                inversions += 1
        return inversions <= 1


def strong_error_probe(problem: ProblemSpec, base_steps: int, levels: int, n_paths: int,
                       seed: int = 0, check: bool = True) -> StrongErrorReport:
    """RMS of ``X^{(h)}_T - X^{(h/2)}_T`` on nested grids driven by shared increments.

    Level ``l`` uses ``base_steps * 2**l`` steps; coarse increments are sums
    of the finest ones, which are the same as ``simulate`` would draw.
    """
    if levels < 2:
        raise SimulationError("levels must be >= 2")
    if n_paths < 1 or base_steps < 1:
        raise SimulationError("n_paths and base_steps must be positive")
    if check:
        _check_problem(problem, SimConfig(n_paths, base_steps))
    tp = _transformed(problem)
    T = problem.T
    fine = base_steps * 2 ** (levels - 1)
    h_fine = T / fine
    ratios = [2 ** (levels - 1 - lv) for lv in range(levels)]
    y0 = tp.transform.at(0.0).R(np.full(n_paths, problem.x0))
    ys = [y0.copy() for _ in range(levels)]
    dw = [np.zeros(n_paths) for _ in range(levels)]
    for j in range(fine):
        z = normals(seed, j, 0, n_paths) * math.sqrt(h_fine)
        for lv, m in enumerate(ratios):
            dw[lv] += z
            if (j + 1) % m == 0:
                t = (j + 1 - m) * h_fine
                sb, bb, _ = tp.coefficients(t, ys[lv])
                ys[lv] = ys[lv] + sb * dw[lv] + bb * m * h_fine
                dw[lv][:] = 0.0
    snap = tp.transform.at(T)
    xT = [snap.r(y) for y in ys]
    rms = [float(np.sqrt(np.mean((xT[k] - xT[k + 1]) ** 2))) for k in range(levels - 1)]
    orders = [math.log2(rms[k] / rms[k + 1]) if rms[k + 1] > 0 and rms[k] > 0 else math.nan
              for k in range(len(rms) - 1)]
    return StrongErrorReport([base_steps * 2 ** lv for lv in range(levels)], rms, orders)
