"""Interface curves and the space-time subdomains they cut out.

Curves come from a small analytic catalog (constant, linear, sinusoid) so
that positions and velocities are exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

CURVE_KINDS = {"constant": 1, "linear": 2, "sinusoid": 4}


class CurveError(ValueError):
    """Raised for malformed curves or out-of-range evaluations."""


@dataclass(frozen=True)
class InterfaceCurve:
    """One C^1 interface curve ``t -> x_i(t)`` on ``[0, T]``.

    Parameters
    ----------
    kind : {"constant", "linear", "sinusoid"}
        ``constant(c)``, ``linear(c0, c1)`` meaning ``c0 + c1*t`` and
        ``sinusoid(c0, amp, freq, phase)`` meaning
        ``c0 + amp*sin(freq*t + phase)``.
    params : tuple of float
    T : float
        Time horizon.
    """

    kind: str
    params: tuple
    T: float

    def __post_init__(self):
        if self.kind not in CURVE_KINDS:
            raise CurveError(f"unknown curve kind {self.kind!r}")
        params = tuple(float(p) for p in self.params)
        if len(params) != CURVE_KINDS[self.kind]:
            raise CurveError(
                f"curve kind {self.kind!r} takes {CURVE_KINDS[self.kind]} params, got {len(params)}"
            )
        if not all(math.isfinite(p) for p in params):
            raise CurveError("curve params must be finite")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise CurveError("horizon T must be positive and finite")
        object.__setattr__(self, "params", params)

    def _check_time(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0.0) or np.any(t > self.T):
            raise CurveError(f"time outside [0, {self.T}]")
        return t

    def value(self, t):
        t = self._check_time(t)
        p = self.params
        if self.kind == "constant":
            out = np.full_like(t, p[0])
        elif self.kind == "linear":
            out = p[0] + p[1] * t
        else:
            out = p[0] + p[1] * np.sin(p[2] * t + p[3])
        return out if out.ndim else float(out)

    def derivative(self, t):
        t = self._check_time(t)
        p = self.params
        if self.kind == "constant":
            out = np.zeros_like(t)
        elif self.kind == "linear":
            out = np.full_like(t, p[1])
        else:
            out = p[1] * p[2] * np.cos(p[2] * t + p[3])
        return out if out.ndim else float(out)

    @property
    def is_static(self) -> bool:
        return (
            self.kind == "constant"
            or (self.kind == "linear" and self.params[1] == 0.0)
            or (self.kind == "sinusoid" and (self.params[1] == 0.0 or self.params[2] == 0.0))
        )

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": list(self.params)}


def eval_curve(curve: InterfaceCurve, t):
    return curve.value(t)


def curve_derivative(curve: InterfaceCurve, t):
    return curve.derivative(t)


@dataclass(frozen=True)
class CurveFamily:
    """Ordered interface curves ``x_1(t) < ... < x_I(t)`` sharing a horizon.

    ``gap`` is the declared minimum separation between neighbours; it is
    checked on a sample grid by :func:`validate_family`, not proven.
    """

    curves: tuple
    T: float
    gap: float = 1e-6

    def __post_init__(self):
        curves = tuple(self.curves)
        if len(curves) < 1:
            raise CurveError("a family needs at least one curve")
        for c in curves:
            if c.T != self.T:
                raise CurveError("all curves must share the family horizon")
        if not self.gap > 0:
            raise CurveError("gap must be positive")
        object.__setattr__(self, "curves", curves)

    @classmethod
    def from_specs(cls, specs: Sequence, T: float, gap: float = 1e-6) -> "CurveFamily":
        """Build from ``(kind, params)`` pairs or ``{"kind", "params"}`` dicts."""
        curves = []
        for s in specs:
            if isinstance(s, InterfaceCurve):
                curves.append(s)
            elif isinstance(s, dict):
                curves.append(InterfaceCurve(s["kind"], tuple(s["params"]), T))
            else:
                kind, params = s
                curves.append(InterfaceCurve(kind, tuple(params), T))
        return cls(tuple(curves), T, gap)

    @classmethod
    def static(cls, positions: Sequence[float], T: float, gap: float | None = None) -> "CurveFamily":
        positions = [float(p) for p in positions]
        if gap is None:
            diffs = np.diff(positions)
            gap = float(diffs.min()) / 2 if len(diffs) else 1.0
            gap = gap if gap > 0 else 1e-6
        return cls(tuple(InterfaceCurve("constant", (p,), T) for p in positions), T, gap)

    @property
    def n_interfaces(self) -> int:
        return len(self.curves)

    @property
    def is_static(self) -> bool:
        return all(c.is_static for c in self.curves)

    def positions(self, t):
        """Curve positions, shape ``(I,)`` for scalar t or ``(n, I)`` for array t."""
        return np.stack([np.asarray(c.value(t), dtype=float) for c in self.curves], axis=-1)

    def velocities(self, t):
        return np.stack([np.asarray(c.derivative(t), dtype=float) for c in self.curves], axis=-1)


def default_tol(x):
    return 1e-12 * (1.0 + np.abs(x))


def subdomain_index(family: CurveFamily, t, x, tol=None):
    """Locate ``(t, x)`` among the subdomains ``D_0, ..., D_I``.

    Returns ``(index, on_interface)``; ``index`` counts curves with
    ``x_i(t) <= x`` (within ``tol``) and ``on_interface`` is the 1-based id
    of a curve within ``tol`` of ``x`` (lowest id on ties), else ``None``.
    Vectorised over ``x``; for array input ``on_interface`` is an int array
    using 0 for "none".
    """
    scalar = np.ndim(x) == 0 and np.ndim(t) == 0
    x = np.asarray(x, dtype=float)
    if tol is None:
        tol = default_tol(x)
    tol = np.asarray(tol, dtype=float)
    if np.any(tol < 0):
        raise CurveError("tol must be non-negative")
    xs = family.positions(t)
    diff = x[..., None] - xs
    near = np.abs(diff) <= tol[..., None]
    index = np.sum((diff >= 0) | near, axis=-1)
    any_near = near.any(axis=-1)
    first = np.argmax(near, axis=-1) + 1
    on = np.where(any_near, first, 0)
    if scalar:
        return int(index), (int(on) if on else None)
    return index, on


@dataclass
class FamilyReport:
    passed: bool
    min_gap: float
    declared_gap: float
    max_speed: float
    per_pair_min_gap: list = field(default_factory=list)

    def __bool__(self):
        return self.passed


def validate_family(family: CurveFamily, n_samples: int = 201) -> FamilyReport:
    """Check ordering on a uniform time grid; failures land in the report."""
    if n_samples < 2:
        raise CurveError("n_samples must be >= 2")
    ts = np.linspace(0.0, family.T, n_samples)
    xs = family.positions(ts)
    max_speed = float(np.abs(family.velocities(ts)).max())
    if family.n_interfaces == 1:
        return FamilyReport(True, math.inf, family.gap, max_speed, [])
    gaps = np.diff(xs, axis=-1)
    per_pair = gaps.min(axis=0).tolist()
    min_gap = float(gaps.min())
    return FamilyReport(min_gap >= family.gap, min_gap, family.gap, max_speed, per_pair)
