"""JSON run configuration: problem description plus per-command sections.

Schema (all keys optional unless marked)::

    {
      "T": 1.0,
      "seed": 0,
      "curves": [{"kind": "constant", "params": [0.0]}],      # required
      "gap": 1e-6,
      "beta": [0.333] or [{"kind": "sinusoid", "params": [...]}],   # required, one per curve
      "sigma": 1.0 | {"kind", "params"} | [piece per subdomain],
      "sigma_bounds": [m, M],
      "b": 0.0 | piece | [pieces],
      "b_bound": M,
      "x0": 0.0,
      "simulate": {...}, "pde": {...}, "validate_fk": {...},
      "validate_ck": {...}, "validate_ip": {...}, "validate_gen": {...},
      "transform_dump": {...}
    }

Command sections are documented in the README.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .coefficients import (BETA_KINDS, PIECE_KINDS, CoefficientError, PiecewiseCoefficient,
                           ProblemSpec, SkewnessSchedule, check_bounds)
from .geometry import CURVE_KINDS, CurveError, CurveFamily, validate_family
from .profiles import PROFILE_KINDS, Profile, ProfileError

SECTIONS = ("simulate", "pde", "validate_fk", "validate_ck", "validate_ip", "validate_gen",
            "transform_dump")
SEED_ENV = "SKEWFLOW_SEED"


class ConfigError(ValueError):
    """Carries every schema error found, each prefixed by its key path."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class RunConfig:
    problem: ProblemSpec
    seed: int
    sections: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)

    def section(self, name: str) -> dict:
        return dict(self.sections.get(name) or {})


def _check_kind(obj, kinds, path, errors):
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        return
    if not isinstance(obj, dict):
        errors.append(f"{path}: expected a number or an object with 'kind' and 'params'")
        return
    if "kind" not in obj:
        errors.append(f"{path}.kind: missing field")
        return
    if obj["kind"] not in kinds:
        errors.append(f"{path}.kind: unknown kind {obj['kind']!r} (known: {', '.join(sorted(kinds))})")
        return
    n = kinds[obj["kind"]]
    params = obj.get("params", [])
    if not isinstance(params, list) or len(params) != n:
        errors.append(f"{path}.params: kind {obj['kind']!r} takes {n} numbers")


def _pieces(obj, path, n_sub, errors):
    items = obj if isinstance(obj, list) else [obj]
    if len(items) not in (1, n_sub):
        errors.append(f"{path}: give one piece or {n_sub} pieces (one per subdomain)")
    for k, it in enumerate(items):
        _check_kind(it, PIECE_KINDS, f"{path}[{k}]" if isinstance(obj, list) else path, errors)
    return items


def _coef(family, items, lower, upper, diffusion):
    coef = PiecewiseCoefficient(family, tuple(items), lower, upper)
    if (diffusion and (lower is None or upper is None)) or (not diffusion and upper is None):
        _, lo, hi = check_bounds(coef, diffusion=diffusion)
        if diffusion:
            lower = lo if lower is None else lower
            upper = hi if upper is None else upper
        else:
            upper = max(abs(lo), abs(hi))
        coef = PiecewiseCoefficient(family, tuple(items), lower, upper)
    return coef


def build_problem(raw: dict) -> ProblemSpec:
    """Build and validate the problem part; raises :class:`ConfigError`."""
    errors = []
    T = raw.get("T", 1.0)
    if not isinstance(T, (int, float)) or not (T > 0 and math.isfinite(T)):
        errors.append("T: must be a positive number")
        T = 1.0
    curves = raw.get("curves")
    if not isinstance(curves, list) or not curves:
        errors.append("curves: missing field (a non-empty list)")
        curves = []
    for k, c in enumerate(curves):
        if not isinstance(c, dict):
            errors.append(f"curves[{k}]: expected an object")
        else:
            _check_kind(c, CURVE_KINDS, f"curves[{k}]", errors)
    beta = raw.get("beta")
    if beta is None:
        errors.append("beta: missing field (one entry per curve)")
        beta = []
    elif not isinstance(beta, list):
        beta = [beta]
    if curves and len(beta) != len(curves) and raw.get("beta") is not None:
        errors.append(f"beta: need {len(curves)} entries, got {len(beta)}")
    for k, b in enumerate(beta):
        _check_kind(b, BETA_KINDS, f"beta[{k}]", errors)
        if isinstance(b, (int, float)) and not -1 < b < 1:
            errors.append(f"beta[{k}]: beta out of (-1, 1): |beta_i(t)| < 1 is required for the "
                          "skew equation to be well posed")
    n_sub = len(curves) + 1
    sig = _pieces(raw.get("sigma", 1.0), "sigma", n_sub, errors)
    drf = _pieces(raw.get("b", 0.0), "b", n_sub, errors)
    if errors:
        raise ConfigError(errors)
    try:
        fam = CurveFamily.from_specs(curves, float(T), float(raw.get("gap", 1e-6)))
    except (CurveError, KeyError, TypeError) as exc:
        raise ConfigError([f"curves: {exc}"]) from None
    rep = validate_family(fam)
    if not rep.passed:
        raise ConfigError([f"curves: ordering violated, need x_1(t) < ... < x_I(t) with gap "
                           f"{fam.gap}; sampled min gap {rep.min_gap:.6g}"])
    try:
        sched = SkewnessSchedule(tuple(beta), float(T))
    except CoefficientError as exc:
        msg = str(exc)
        if msg.startswith("beta out of"):
            msg += "; |beta_i(t)| < 1 is required for the skew equation to be well posed"
        raise ConfigError([f"beta: {msg}"]) from None
    bounds = raw.get("sigma_bounds")
    lo, hi = (bounds if bounds else (None, None))
    try:
        sigma = _coef(fam, sig, lo, hi, True)
        b = _coef(fam, drf, None, raw.get("b_bound"), False)
        problem = ProblemSpec(sigma, b, sched, fam, float(raw.get("x0", 0.0)))
    except (CoefficientError, TypeError, ValueError) as exc:
        raise ConfigError([f"coefficients: {exc}"]) from None
    return problem


def parse_config(text: str, env=None) -> RunConfig:
    """Parse JSON text into a validated :class:`RunConfig`.

    ``SKEWFLOW_SEED`` in ``env`` (default ``os.environ``) overrides ``seed``.
    """
    env = os.environ if env is None else env
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"<root>: invalid JSON ({exc.msg} at line {exc.lineno})"]) from None
    if not isinstance(raw, dict):
        raise ConfigError(["<root>: expected an object"])
    errors = []
    seed = raw.get("seed", 0)
    if env.get(SEED_ENV) not in (None, ""):
        try:
            seed = int(env[SEED_ENV])
        except ValueError:
            errors.append(f"{SEED_ENV}: not an integer")
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        errors.append("seed: must be a non-negative integer")
    for key in SECTIONS:
        if key in raw and not isinstance(raw[key], dict):
            errors.append(f"{key}: expected an object")
    for key in ("f", "g", "phi"):
        for sec in SECTIONS:
            obj = (raw.get(sec) or {}).get(key) if isinstance(raw.get(sec), dict) else None
            if obj is not None and not isinstance(obj, (int, float)):
                _check_kind(obj, PROFILE_KINDS, f"{sec}.{key}", errors)
    try:
        problem = build_problem(raw)
    except ConfigError as exc:
        errors.extend(exc.errors)
        problem = None
    if errors:
        raise ConfigError(errors)
    sections = {k: raw[k] for k in SECTIONS if k in raw}
    return RunConfig(problem, int(seed), sections, raw)


def profile(obj) -> Profile:
    try:
        return Profile.from_config(obj)
    except (ProfileError, KeyError, TypeError) as exc:
        raise ConfigError([f"profile: {exc}"]) from None


def as_float_list(obj, name):
    try:
        return [float(v) for v in np.atleast_1d(obj)]
    except (TypeError, ValueError):
        raise ConfigError([f"{name}: expected numbers"]) from None
