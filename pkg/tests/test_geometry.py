import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from skewflow.geometry import (CurveError, CurveFamily, InterfaceCurve, curve_derivative,
                               eval_curve, subdomain_index, validate_family)

T = 10.0


@pytest.mark.parametrize("kind,params,t,expected", [
    ("constant", (0.0,), 0.3, 0.0),
    ("linear", (1.0, 0.5), 2.0, 2.0),
    ("sinusoid", (0.0, 1.0, 1.0, 0.0), math.pi / 2, 1.0),
])
def test_eval_curve(kind, params, t, expected):
    assert eval_curve(InterfaceCurve(kind, params, T), t) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("kind,params,t,expected", [
    ("constant", (5.0,), 3.3, 0.0),
    ("linear", (1.0, 0.5), 7.0, 0.5),
    ("sinusoid", (0.0, 1.0, 1.0, 0.0), 0.0, 1.0),
])
def test_curve_derivative(kind, params, t, expected):
    assert curve_derivative(InterfaceCurve(kind, params, T), t) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("t", [-0.1, T + 1e-9])
def test_evaluation_outside_horizon_raises(t):
    with pytest.raises(CurveError):
        eval_curve(InterfaceCurve("linear", (0.0, 1.0), T), t)


@pytest.mark.parametrize("kind,params", [
    ("cubic", (1.0,)),
    ("linear", (1.0,)),
    ("constant", (math.nan,)),
])
def test_malformed_curves(kind, params):
    with pytest.raises(CurveError):
        InterfaceCurve(kind, params, T)


def test_finite_difference_affine_exact():
    c = InterfaceCurve("linear", (0.3, -1.2), T)
    ts = np.linspace(0.5, 9.5, 13)
    h = 1e-3
    fd = (c.value(ts + h) - c.value(ts - h)) / (2 * h)
    assert np.abs(fd - c.derivative(ts)).max() < 1e-10


@pytest.mark.parametrize("kind,params", [
    ("sinusoid", (0.1, 0.7, 2.3, 0.4)),
    ("sinusoid", (-1.0, 2.0, 0.5, -1.0)),
])
def test_finite_difference_order(kind, params):
    c = InterfaceCurve(kind, params, T)
    ts = np.linspace(0.5, 9.5, 13)
    errs = []
    for h in (1e-3, 1e-4):
        fd = (c.value(ts + h) - c.value(ts - h)) / (2 * h)
        errs.append(np.abs(fd - c.derivative(ts)).max())
    assert math.log10(errs[0] / errs[1]) >= 1.9


def _pair(lo=1.0, hi=2.0, gap=1e-6):
    return CurveFamily.static([lo, hi], 1.0, gap=gap)


@pytest.mark.parametrize("x,expected", [
    (0.5, (0, None)),
    (1.5, (1, None)),
    (2.0, (2, 2)),
    (1.0, (1, 1)),
    (3.0, (2, None)),
])
def test_subdomain_index(x, expected):
    assert subdomain_index(_pair(), 0.0, x, tol=1e-9) == expected


def test_subdomain_index_vectorised():
    idx, on = subdomain_index(_pair(), 0.0, np.array([0.5, 1.0, 1.5, 2.0, 2.5]))
    assert idx.tolist() == [0, 1, 1, 2, 2]
    assert on.tolist() == [0, 1, 0, 2, 0]


def test_subdomain_index_negative_tol():
    with pytest.raises(CurveError):
        subdomain_index(_pair(), 0.0, 1.0, tol=-1.0)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0, 1))
def test_subdomain_index_monotone(x, xp, t):
    fam = CurveFamily.from_specs([("sinusoid", (0.0, 0.5, 3.0, 0.0)), ("linear", (1.5, 0.5))], 1.0)
    lo, hi = sorted((x, xp))
    assert subdomain_index(fam, t, lo)[0] <= subdomain_index(fam, t, hi)[0]


def test_validate_family_pass():
    rep = validate_family(_pair(gap=0.5))
    assert rep.passed and rep.min_gap == pytest.approx(1.0)


def test_validate_family_crossing_curves():
    fam = CurveFamily.from_specs([("sinusoid", (0.0, 1.0, 1.0, 0.0)), ("constant", (0.5,))], math.pi)
    assert not validate_family(fam)


def test_validate_family_single_curve_vacuous():
    assert validate_family(CurveFamily.static([0.0], 1.0, gap=1.0)).passed


@settings(max_examples=30)
@given(st.floats(0.05, 2.0), st.floats(0.01, 2.0))
def test_validate_family_iff_min_gap(sep, gap):
    fam = CurveFamily.from_specs([("sinusoid", (0.0, 0.3, 2.0, 0.0)), ("sinusoid", (sep, 0.3, 2.0, 0.0))],
                                 1.0, gap)
    rep = validate_family(fam)
    assert rep.passed == (rep.min_gap >= gap)


def test_family_requires_shared_horizon():
    with pytest.raises(CurveError):
        CurveFamily((InterfaceCurve("constant", (0.0,), 1.0), InterfaceCurve("constant", (1.0,), 2.0)), 1.0)


def test_positions_shapes():
    fam = _pair()
    assert fam.positions(0.5).shape == (2,)
    assert fam.positions(np.linspace(0, 1, 5)).shape == (5, 2)
    assert fam.is_static
