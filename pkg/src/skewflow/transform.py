"""Space bijections: local-time removal (R, r), interface straightening (psi, Psi),
and the divergence-form dictionary.

All maps are piecewise affine in space, so they are evaluated through
closed-form segment sums rather than quadrature.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coefficients import SIDES, CoefficientError, SkewnessSchedule
from .geometry import CurveError, CurveFamily, InterfaceCurve, validate_family


class TransformError(ValueError):
    pass


def _gather(arr, idx):
    if arr.ndim == 1:
        return arr[idx]
    return np.take_along_axis(arr, idx[..., None], axis=-1)[..., 0]


def _count_le(nodes, v):
    """Number of nodes <= v, row-wise when nodes is 2-D."""
    return np.sum(nodes <= v[..., None], axis=-1)


def _prepend(arr, value):
    pad = np.full(arr.shape[:-1] + (1,), value, dtype=float)
    return np.concatenate([pad, arr], axis=-1)


class RemovalSnapshot:
    """The removal maps frozen at one time (or a vector of times).

    ``Pi[k]`` is the slope of ``R(t, .)`` on subdomain ``D_k``; ``ys`` are the
    images ``y_i = R(t, x_i(t))``.
    """

    def __init__(self, xs, vx, beta, dbeta):
        self.xs = xs
        self.vx = vx
        kappa = (1.0 - beta) / (1.0 + beta)
        self.Pi = _prepend(np.cumprod(kappa, axis=-1), 1.0)
        dlog = -2.0 * dbeta / (1.0 - beta ** 2)
        self.dlogPi = _prepend(np.cumsum(dlog, axis=-1), 0.0)
        dPi = self.Pi * self.dlogPi
        seg = np.diff(xs, axis=-1)
        dseg = np.diff(vx, axis=-1)
        inner = self.Pi[..., 1:-1]
        self.ys = _prepend(np.cumsum(inner * seg, axis=-1), 0.0)
        self.dys = _prepend(np.cumsum(dPi[..., 1:-1] * seg + inner * dseg, axis=-1), 0.0)

    def mu(self, x):
        x = np.asarray(x, dtype=float)
        return _gather(self.Pi, _count_le(self.xs, x))

    def R(self, x):
        x = np.asarray(x, dtype=float)
        k = _count_le(self.xs, x)
        a = np.maximum(k, 1) - 1
        return _gather(self.ys, a) + _gather(self.Pi, k) * (x - _gather(self.xs, a))

    def r(self, y):
        y = np.asarray(y, dtype=float)
        k = _count_le(self.ys, y)
        a = np.maximum(k, 1) - 1
        return _gather(self.xs, a) + (y - _gather(self.ys, a)) / _gather(self.Pi, k)

    def alpha(self, y):
        y = np.asarray(y, dtype=float)
        return 1.0 / _gather(self.Pi, _count_le(self.ys, y))

    def _on_interface(self, y, k):
        # k >= 1 and y exactly on y_k (1-based); left piece is k-1
        ya = _gather(self.ys, np.maximum(k, 1) - 1)
        return (k >= 1) & (y == ya)

    def r_y(self, y, side="symmetric"):
        y = np.asarray(y, dtype=float)
        k = _count_le(self.ys, y)
        right = 1.0 / _gather(self.Pi, k)
        if side == "right":
            return right
        on = self._on_interface(y, k)
        left = np.where(on, 1.0 / _gather(self.Pi, np.maximum(k - 1, 0)), right)
        if side == "left":
            return left
        return 0.5 * (left + right)

    def _r_t_piece(self, y, k):
        a = np.maximum(k, 1) - 1
        A = 1.0 / _gather(self.Pi, k)
        dA = -A * _gather(self.dlogPi, k)
        return _gather(self.vx, a) - _gather(self.dys, a) * A + (y - _gather(self.ys, a)) * dA

    def inverse_with_slopes(self, y):
        """``(r, r'_y, r'_t)`` with symmetric averages on the curves, sharing one search."""
        y = np.asarray(y, dtype=float)
        k = _count_le(self.ys, y)
        a = np.maximum(k, 1) - 1
        ya = _gather(self.ys, a)
        A = 1.0 / _gather(self.Pi, k)
        dy = y - ya
        x = _gather(self.xs, a) + dy * A
        ry = A
        rt = _gather(self.vx, a) - _gather(self.dys, a) * A - dy * A * _gather(self.dlogPi, k)
        on = (k >= 1) & (dy == 0.0)
        if np.any(on):
            ry = np.where(on, self.r_y(y), ry)
            rt = np.where(on, self.r_t(y), rt)
        return x, ry, rt

    def r_t(self, y, side="symmetric"):
        y = np.asarray(y, dtype=float)
        k = _count_le(self.ys, y)
        right = self._r_t_piece(y, k)
        if side == "right":
            return right
        on = self._on_interface(y, k)
        left = np.where(on, self._r_t_piece(y, np.maximum(k - 1, 0)), right)
        if side == "left":
            return left
        return 0.5 * (left + right)


@dataclass(frozen=True)
class RemovalTransform:
    """The pair ``R(t, .)``, ``r(t, .) = R(t, .)^{-1}`` whose slope jumps cancel the skew terms."""

    family: CurveFamily
    beta: SkewnessSchedule

    def __post_init__(self):
        if self.beta.n_interfaces != self.family.n_interfaces:
            raise TransformError("beta schedule and curve family disagree on I")

    def at(self, t) -> RemovalSnapshot:
        return RemovalSnapshot(
            self.family.positions(t),
            self.family.velocities(t),
            self.beta.values(t),
            self.beta.derivatives(t),
        )

    def slope_bounds(self):
        """Range of the slope products over the sampled beta range."""
        lo_k = (1 - self.beta.kappa) / (1 + self.beta.kappa)
        hi_k = (1 - self.beta.k) / (1 + self.beta.k)
        vals = [1.0]
        p_lo = p_hi = 1.0
        for _ in range(self.family.n_interfaces):
            p_lo *= lo_k
            p_hi *= hi_k
            vals += [p_lo, p_hi]
        return min(vals), max(vals)


def mu(tr: RemovalTransform, t, x):
    return tr.at(t).mu(x)


def big_R(tr: RemovalTransform, t, x):
    return tr.at(t).R(x)


def little_r(tr: RemovalTransform, t, y):
    return tr.at(t).r(y)


def alpha(tr: RemovalTransform, t, y):
    return tr.at(t).alpha(y)


def transformed_curves(tr: RemovalTransform, t):
    return tr.at(t).ys


def R_slopes(tr: RemovalTransform, t, i: int):
    """One-sided slopes ``(R'_x(t, x_i+), R'_x(t, x_i-))``."""
    snap = tr.at(t)
    return snap.Pi[..., i], snap.Pi[..., i - 1]


def r_slopes(tr: RemovalTransform, t, i: int):
    """One-sided slopes ``(r'_y(t, y_i+), r'_y(t, y_i-))``."""
    snap = tr.at(t)
    return 1.0 / snap.Pi[..., i], 1.0 / snap.Pi[..., i - 1]


def pushforward_beta(phi_plus, phi_minus, beta):
    """Skewness seen after a monotone piecewise-smooth change of variable.

    ``phi_plus``/``phi_minus`` are the one-sided space derivatives of the map
    at the interface.
    """
    phi_plus = np.asarray(phi_plus, dtype=float)
    phi_minus = np.asarray(phi_minus, dtype=float)
    if np.any(phi_plus <= 0) or np.any(phi_minus <= 0):
        raise TransformError("one-sided slopes must be positive")
    up = phi_plus * (1.0 + beta)
    down = phi_minus * (1.0 - beta)
    out = (up - down) / (up + down)
    return float(out) if np.ndim(out) == 0 else out


class TransformedProblem:
    """Local-time-free SDE ``dY = sigma_bar dW + b_bar dt`` with its curves ``y_i``.

    ``m_bar``, ``M_bar`` bound ``sigma_bar`` and ``|b_bar|``.  The bound on
    ``b_bar`` is only certified on ``|y| <= window``: with time-varying skewness
    the outermost slope moves and ``r'_t`` grows linearly in ``y``.
    """

    def __init__(self, tr: RemovalTransform, sigma, b, window: float = 50.0, n_t: int = 101):
        self.transform = tr
        self.sigma = sigma
        self.b = b
        self.window = window
        p_lo, p_hi = tr.slope_bounds()
        s_lo = sigma.lower if sigma.lower is not None else None
        s_hi = sigma.upper
        self.m_bar = s_lo * p_lo if s_lo is not None else None
        # r_t sampled on the window
        ts = np.linspace(0.0, tr.family.T, n_t)
        ys = np.linspace(-window, window, 401)
        rt_max = 0.0
        for t in ts:
            rt_max = max(rt_max, float(np.abs(tr.at(t).r_t(ys)).max()))
        self.rt_max = rt_max
        b_hi = b.upper
        if s_hi is not None and b_hi is not None:
            self.M_bar = max(s_hi * p_hi, (b_hi + rt_max) * p_hi)
        else:
            self.M_bar = None

    def coefficients(self, t, y):
        """``(sigma_bar, b_bar, x)`` at time ``t`` for states ``y``."""
        x, ry, rt = self.transform.at(t).inverse_with_slopes(y)
        sb = self.sigma(t, x) / ry
        bb = (self.b(t, x) - rt) / ry
        return sb, bb, x

    def sigma_bar(self, t, y):
        return self.coefficients(t, y)[0]

    def b_bar(self, t, y):
        return self.coefficients(t, y)[1]

    def curves(self, t):
        return self.transform.at(t).ys


def transformed_sde_coeffs(tr: RemovalTransform, sigma, b, **kw) -> TransformedProblem:
    return TransformedProblem(tr, sigma, b, **kw)


# ---------------------------------------------------------------------------
# straightening


def _ghost(curve: InterfaceCurve, shift: float) -> InterfaceCurve:
    p = list(curve.params)
    p[0] += shift
    return InterfaceCurve(curve.kind, tuple(p), curve.T)


class StraightenTransform:
    """Piecewise-affine ``Psi(t, .)`` sending ``x_i(t)`` to the integer ``i``.

    Families with fewer than three curves are padded with ghost curves at
    distance ``family.gap`` outside the physical ones; ghosts carry zero
    skewness.  ``physical`` maps physical interface ids (1-based) to padded
    ids.
    """

    def __init__(self, family: CurveFamily, check_samples: int = 201):
        report = validate_family(family, check_samples)
        if not report.passed:
            raise TransformError(
                f"degenerate interface gaps: min gap {report.min_gap} < declared {family.gap}"
            )
        curves = list(family.curves)
        g = family.gap
        if len(curves) == 1:
            curves = [_ghost(curves[0], -g), curves[0], _ghost(curves[0], g)]
            physical = (2,)
        elif len(curves) == 2:
            curves = curves + [_ghost(curves[1], g)]
            physical = (1, 2)
        else:
            physical = tuple(range(1, len(curves) + 1))
        self.source = family
        self.family = CurveFamily(tuple(curves), family.T, family.gap)
        self.physical = physical
        self.n = len(curves)
        self.cylinder = CurveFamily.static(list(range(1, self.n + 1)), family.T, gap=1.0)

    def _segments(self, t):
        xs = self.family.positions(t)
        vx = self.family.velocities(t)
        return xs, vx

    def _anchor_from_x(self, xs, x):
        return np.clip(_count_le(xs, x), 1, self.n - 1)

    def Psi(self, t, x):
        x = np.asarray(x, dtype=float)
        xs, _ = self._segments(t)
        j = self._anchor_from_x(xs, x)
        xj = _gather(xs, j - 1)
        xj1 = _gather(xs, j)
        return (x - xj) / (xj1 - xj) + j

    def psi(self, t, xh):
        xh = np.asarray(xh, dtype=float)
        xs, _ = self._segments(t)
        j = np.clip(np.floor(xh).astype(int), 1, self.n - 1)
        xj = _gather(xs, j - 1)
        xj1 = _gather(xs, j)
        return xj + (xj1 - xj) * (xh - j)

    def _sided(self, t, x, side, fn):
        x = np.asarray(x, dtype=float)
        xs, vx = self._segments(t)
        j = self._anchor_from_x(xs, x)
        right = fn(xs, vx, j, x)
        if side == "right":
            return right
        cnt = _count_le(xs, x)
        on = (cnt >= 1) & (x == _gather(xs, np.maximum(cnt, 1) - 1))
        jl = np.clip(cnt - 1, 1, self.n - 1)
        left = np.where(on, fn(xs, vx, jl, x), right)
        if side == "left":
            return left
        return 0.5 * (left + right)

    @staticmethod
    def _slope(xs, vx, j, x):
        return 1.0 / (_gather(xs, j) - _gather(xs, j - 1))

    @staticmethod
    def _time_slope(xs, vx, j, x):
        xj = _gather(xs, j - 1)
        d = _gather(xs, j) - xj
        dd = _gather(vx, j) - _gather(vx, j - 1)
        return -_gather(vx, j - 1) / d - (x - xj) * dd / d ** 2

    def Psi_x(self, t, x, side="symmetric"):
        return self._sided(t, x, side, self._slope)

    def Psi_t(self, t, x, side="symmetric"):
        return self._sided(t, x, side, self._time_slope)

    def slope_bounds(self, n_t: int = 201):
        ts = np.linspace(0.0, self.family.T, n_t)
        d = np.diff(self.family.positions(ts), axis=-1)
        return float(1.0 / d.max()), float(1.0 / d.min())


def straighten(family: CurveFamily) -> StraightenTransform:
    try:
        return StraightenTransform(family)
    except CurveError as exc:
        raise TransformError(str(exc)) from exc


class HatCoefficient:
    """``(coef * Psi'_x [+ Psi'_t]) o psi`` on the straightened coordinate."""

    def __init__(self, st: StraightenTransform, coef, add_time_slope: bool):
        self.st = st
        self.coef = coef
        self.add_time_slope = add_time_slope
        self.family = st.cylinder

    def __call__(self, t, xh, side="symmetric"):
        if side not in SIDES:
            raise CoefficientError(f"side must be one of {SIDES}")
        scalar = np.ndim(xh) == 0
        xh = np.atleast_1d(np.asarray(xh, dtype=float))
        x = self.st.psi(t, xh)
        if side == "symmetric":
            out = 0.5 * (self._one(t, x, "left") + self._one(t, x, "right"))
        else:
            out = self._one(t, x, side)
        return float(out[0]) if scalar else out

    def _one(self, t, x, side):
        val = self.coef(t, x, self._coef_side(t, x, side)) * self.st.Psi_x(t, x, side)
        if self.add_time_slope:
            val = val + self.st.Psi_t(t, x, side)
        return val

    def _coef_side(self, t, x, side):
        return side


class HatSchedule:
    """Skewness of the straightened problem, one value per padded interface."""

    def __init__(self, st: StraightenTransform, beta: SkewnessSchedule):
        self.st = st
        self.beta = beta
        self.T = beta.T

    @property
    def n_interfaces(self):
        return self.st.n

    def padded_beta(self, t):
        t_arr = np.asarray(t, dtype=float)
        out = np.zeros(t_arr.shape + (self.st.n,))
        vals = self.beta.values(t)
        for phys, pad in enumerate(self.st.physical):
            out[..., pad - 1] = vals[..., phys]
        return out

    def values(self, t):
        bet = self.padded_beta(t)
        xs = self.st.family.positions(t)
        plus = self.st.Psi_x(t, xs, "right")
        minus = self.st.Psi_x(t, xs, "left")
        return pushforward_beta(plus, minus, bet)

    def value(self, i: int, t):
        return self.values(t)[..., i - 1]

    def derivatives(self, t, h: float = 1e-6):
        t = np.asarray(t, dtype=float)
        lo = np.clip(t - h, 0.0, self.T)
        hi = np.clip(t + h, 0.0, self.T)
        return (self.values(hi) - self.values(lo)) / (hi - lo)[..., None]


@dataclass
class HatCoefficients:
    sigma: HatCoefficient
    b: HatCoefficient
    beta: HatSchedule
    transform: StraightenTransform


def hat_coefficients(st: StraightenTransform, sigma, b, beta: SkewnessSchedule) -> HatCoefficients:
    return HatCoefficients(
        HatCoefficient(st, sigma, add_time_slope=False),
        HatCoefficient(st, b, add_time_slope=True),
        HatSchedule(st, beta),
        st,
    )


# ---------------------------------------------------------------------------
# divergence form


class DivergenceTriple:
    """``(rho, a, B)`` with ``rho*a = sigma^2``, ``a`` jumping as dictated by beta, ``B = b``.

    ``scale`` selects the equivalent triple ``(scale*rho, a/scale, B)``.
    """

    def __init__(self, sigma, b, beta, family: CurveFamily, scale: float = 1.0):
        if scale <= 0:
            raise TransformError("scale must be positive")
        self.sigma = sigma
        self.b = b
        self.beta = beta
        self.family = family
        self.scale = float(scale)

    def _a_unscaled(self, t, x, side):
        x = np.asarray(x, dtype=float)
        bet = self.beta.values(t)
        ratio = (1.0 + bet) / (1.0 - bet)
        prods = _prepend(np.cumprod(ratio, axis=-1), 1.0)
        xs = self.family.positions(t)
        k = _count_le(xs, x)
        right = _gather(prods, k)
        if side == "right":
            return right
        on = (k >= 1) & (x == _gather(xs, np.maximum(k, 1) - 1))
        left = np.where(on, _gather(prods, np.maximum(k - 1, 0)), right)
        if side == "left":
            return left
        return 0.5 * (left + right)

    def a(self, t, x, side="symmetric"):
        return self._a_unscaled(t, x, side) / self.scale

    def rho(self, t, x, side="symmetric"):
        if side == "symmetric":
            return 0.5 * (self.rho(t, x, "left") + self.rho(t, x, "right"))
        return self.scale * self.sigma(t, x, side) ** 2 / self._a_unscaled(t, x, side)

    def B(self, t, x, side="symmetric"):
        return self.b(t, x, side)

    def segment_a(self, t):
        """``a`` on each subdomain ``D_0..D_I`` (piecewise constant in x)."""
        bet = self.beta.values(t)
        ratio = (1.0 + bet) / (1.0 - bet)
        return _prepend(np.cumprod(ratio, axis=-1), 1.0) / self.scale


def divergence_triple(sigma, b, beta, family: CurveFamily, scale: float = 1.0) -> DivergenceTriple:
    return DivergenceTriple(sigma, b, beta, family, scale)


def beta_from_a(a_plus, a_minus):
    a_plus = np.asarray(a_plus, dtype=float)
    a_minus = np.asarray(a_minus, dtype=float)
    out = (a_plus - a_minus) / (a_plus + a_minus)
    return float(out) if np.ndim(out) == 0 else out
