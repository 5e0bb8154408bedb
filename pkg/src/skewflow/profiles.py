"""Terminal data ``f(x)`` and sources ``g(t, x)`` used by the PDE and Feynman--Kac code."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# name -> number of params
PROFILE_KINDS = {
    "zero": 0,
    "constant": 1,          # c
    "gaussian": 3,          # amp, center, width
    "bump": 3,              # amp, center, radius (C-infinity, compact)
    "piecewise_linear": 4,  # knot, value at knot, slope left, slope right
    "step": 2,              # knot, value right of knot (0 on the left)
}


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class Profile:
    """Space profile times an optional affine time factor ``c0 + c1*t``."""

    kind: str
    params: tuple = ()
    time_factor: tuple | None = None

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ProfileError(f"unknown profile kind {self.kind!r}")
        params = tuple(float(p) for p in self.params)
        if len(params) != PROFILE_KINDS[self.kind]:
            raise ProfileError(f"profile {self.kind!r} takes {PROFILE_KINDS[self.kind]} params")
        if self.kind in ("gaussian", "bump") and not params[2] > 0:
            raise ProfileError("width/radius must be positive")
        object.__setattr__(self, "params", params)
        if self.time_factor is not None:
            tf = tuple(float(c) for c in self.time_factor)
            if len(tf) != 2:
                raise ProfileError("time_factor is (c0, c1)")
            object.__setattr__(self, "time_factor", tf)

    @classmethod
    def from_config(cls, obj) -> "Profile":
        if isinstance(obj, Profile):
            return obj
        if obj is None:
            return cls("zero")
        if isinstance(obj, (int, float)):
            return cls("constant", (obj,)) if obj != 0 else cls("zero")
        return cls(obj["kind"], tuple(obj.get("params", ())), obj.get("time_factor"))

    def space(self, x):
        x = np.asarray(x, dtype=float)
        p = self.params
        k = self.kind
        if k == "zero":
            return np.zeros_like(x)
        if k == "constant":
            return np.full_like(x, p[0])
        if k == "gaussian":
            return p[0] * np.exp(-((x - p[1]) ** 2) / (2 * p[2] ** 2))
        if k == "bump":
            z = (x - p[1]) / p[2]
            inside = np.abs(z) < 1
            zz = np.where(inside, z, 0.0)
            return np.where(inside, p[0] * np.exp(1.0 - 1.0 / (1.0 - zz ** 2)), 0.0)
        if k == "piecewise_linear":
            d = x - p[0]
            return p[1] + np.where(d < 0, p[2] * d, p[3] * d)
        return np.where(x >= p[0], p[1], 0.0)

    def __call__(self, *args):
        """``f(x)`` or ``g(t, x)``."""
        if len(args) == 1:
            return self.space(args[0])
        t, x = args
        out = self.space(x)
        if self.time_factor is not None:
            out = out * (self.time_factor[0] + self.time_factor[1] * np.asarray(t, dtype=float))
        return out

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or (self.kind in ("constant", "gaussian", "bump") and self.params[0] == 0)

    def support(self):
        """``(lo, hi)`` outside which the profile vanishes, ``None`` if unbounded."""
        if self.is_zero:
            return (math.inf, -math.inf)
        if self.kind == "bump":
            return (self.params[1] - self.params[2], self.params[1] + self.params[2])
        return None

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "params": list(self.params)}
        if self.time_factor is not None:
            d["time_factor"] = list(self.time_factor)
        return d
