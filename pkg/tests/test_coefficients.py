import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from skewflow.coefficients import (CatalogFunction, CoefficientError, PiecewiseCoefficient,
                                   ProblemSpec, SkewnessSchedule, check_AJ_hypothesis,
                                   check_bounds, check_H_hypothesis, eval_beta,
                                   eval_beta_derivative, eval_one_sided, validate_problem)
from skewflow.geometry import CurveFamily


@pytest.fixture
def fam():
    return CurveFamily.static([0.0], 1.0, gap=1.0)


@pytest.fixture
def sigma12(fam):
    return PiecewiseCoefficient(fam, (1.0, 2.0), 1.0, 2.0)


@pytest.mark.parametrize("side,expected", [("left", 1.0), ("right", 2.0), ("symmetric", 1.5)])
def test_one_sided_values(sigma12, side, expected):
    assert eval_one_sided(sigma12, 0.4, 0.0, side) == expected


@pytest.mark.parametrize("side", ["left", "right", "symmetric"])
def test_interior_point_ignores_side(sigma12, side):
    assert eval_one_sided(sigma12, 0.4, -3.0, side) == 1.0


def test_half_jump(sigma12):
    assert sigma12.jump(0.2, 1) == 0.5


def test_bad_side(sigma12):
    with pytest.raises(CoefficientError):
        sigma12(0.0, 0.0, "middle")


@given(st.floats(0, 1))
def test_symmetric_is_average(t):
    fam = CurveFamily.from_specs([("sinusoid", (0.0, 0.4, 3.0, 0.0)), ("linear", (1.0, 0.5))], 1.0)
    coef = PiecewiseCoefficient(fam, (("affine", (1.0, 0.2, 0.1)), ("sinusoid_t", (2.0, 0.5, 1.0, 0.0)),
                                      ("arctan", (1.5, 0.3, 2.0))))
    for xi in fam.positions(t):
        l, r, s = (coef(t, xi, side) for side in ("left", "right", "symmetric"))
        assert s == 0.5 * (l + r)


def test_piece_count_checked(fam):
    with pytest.raises(CoefficientError):
        PiecewiseCoefficient(fam, (1.0, 2.0, 3.0))


@pytest.mark.parametrize("kind,params", [
    ("affine", (1.0, 0.3, -0.2)),
    ("product", (1.0, 0.5, 2.0, -0.4)),
    ("sinusoid_t", (1.0, 0.5, 2.0, 0.3)),
    ("sinusoid_x", (1.0, 0.5, 2.0, 0.3)),
    ("arctan", (1.0, 0.5, 2.0)),
])
def test_catalog_derivatives_match_fd(kind, params):
    f = CatalogFunction(kind, params)
    t, x, h = 0.37, np.linspace(-2, 2, 9), 1e-6
    assert np.allclose((f(t, x + h) - f(t, x - h)) / (2 * h), f.dx(t, x), atol=1e-8)
    assert np.allclose((f(t + h, x) - f(t - h, x)) / (2 * h), f.dt(t, x), atol=1e-8)


def test_H_piecewise_constant(sigma12):
    rep = check_H_hypothesis(sigma12)
    assert rep.passed and rep.sup_dx == [0.0, 0.0]


def test_H_affine_piece(fam):
    coef = PiecewiseCoefficient(fam, (("affine", (1.0, 1.0, 0.0)), 1.0))
    assert check_H_hypothesis(coef).sup_dx[0] == pytest.approx(1.0)


def test_H_time_sinusoid(fam):
    b = PiecewiseCoefficient(fam, (("sinusoid_t", (0.0, 1.0, 1.0, 0.0)),), None, 1.0)
    # sampled sup of |cos t| on [0, 1] is attained at t = 0
    assert max(check_H_hypothesis(b).sup_dt) == pytest.approx(1.0)


def test_AJ_constant_jump(fam):
    # sigma^2 jumps by 3
    rep = check_AJ_hypothesis(PiecewiseCoefficient(fam, (1.0, 2.0)))
    assert rep.passed and rep.C_star == pytest.approx(1.0)


def test_AJ_no_jump_vacuous(fam):
    rep = check_AJ_hypothesis(PiecewiseCoefficient(fam, (1.5,)))
    assert rep.passed and rep.C_star == 0.0


class _SqrtJump:
    """``sqrt(2 + sin(t)^2)`` so that the sigma^2 jump against 1 is ``1 + sin^2``."""

    def __call__(self, t, x):
        return np.sqrt(2.0 + np.sin(t) ** 2) + 0.0 * np.asarray(x)

    def dx(self, t, x):
        return 0.0 * np.asarray(x) + 0.0 * np.asarray(t)

    def dt(self, t, x):
        return np.sin(t) * np.cos(t) / self(t, x)


def test_AJ_sin_squared():
    fam = CurveFamily.static([0.0], math.pi, gap=1.0)
    rep = check_AJ_hypothesis(PiecewiseCoefficient(fam, (1.0, _SqrtJump())), n_t=2001)
    assert rep.C_star == pytest.approx(4 / 3, rel=1e-5)


def test_bounds_membership(sigma12):
    ok, lo, hi = check_bounds(sigma12)
    assert ok and lo == 1.0 and hi == 2.0


def test_bounds_violation(fam):
    coef = PiecewiseCoefficient(fam, (("affine", (1.0, 1.0, 0.0)), 1.0), 0.1, 5.0)
    assert not check_bounds(coef)[0]


@pytest.mark.parametrize("fn,t,expected", [
    (1 / 3, 0.5, (1 / 3, 0.0)),
    (("sinusoid", (0.0, 0.5, 1.0, 0.0)), 0.0, (0.0, 0.5)),
    (0.9, 0.2, (0.9, 0.0)),
])
def test_beta_values(fn, t, expected):
    sched = SkewnessSchedule((fn,), 1.0)
    assert eval_beta(sched, 1, t) == pytest.approx(expected[0], abs=1e-15)
    assert eval_beta_derivative(sched, 1, t) == pytest.approx(expected[1], abs=1e-15)


def test_constant_beta_derivative_bound():
    assert SkewnessSchedule.constant([0.3, -0.2], 1.0).M_beta == 0.0


@pytest.mark.parametrize("fn", [1.5, -1.0, ("sinusoid", (0.5, 0.6, 1.0, 0.0))])
def test_beta_out_of_range(fn):
    with pytest.raises(CoefficientError, match="beta out of"):
        SkewnessSchedule((fn,), 2.0)


def test_beta_index_and_time_checks():
    sched = SkewnessSchedule.constant([0.3], 1.0)
    with pytest.raises(CoefficientError):
        sched.value(2, 0.5)
    with pytest.raises(CoefficientError):
        sched.value(1, 1.5)


def test_problem_validation():
    assert validate_problem(ProblemSpec.skew_bm(1 / 3)).passed
    fam = CurveFamily.static([0.0], 1.0, gap=1.0)
    bad = ProblemSpec(PiecewiseCoefficient(fam, (1.0, 2.0), 1.0, 1.5),
                      PiecewiseCoefficient.constant(fam, 0.0, None, 0.0),
                      SkewnessSchedule.constant([0.0], 1.0), fam)
    rep = validate_problem(bad)
    assert not rep.passed and "sigma" in rep.messages[0]


def test_problem_requires_matching_interfaces():
    fam = CurveFamily.static([0.0], 1.0, gap=1.0)
    with pytest.raises(CoefficientError):
        ProblemSpec(PiecewiseCoefficient.constant(fam, 1.0, 1.0, 1.0),
                    PiecewiseCoefficient.constant(fam, 0.0, None, 0.0),
                    SkewnessSchedule.constant([0.1, 0.2], 1.0), fam)
