import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import piecewise_R
from skewflow.coefficients import PiecewiseCoefficient, ProblemSpec, SkewnessSchedule
from skewflow.geometry import CurveFamily
from skewflow.transform import (R_slopes, RemovalTransform, TransformError, beta_from_a, big_R,
                                divergence_triple, hat_coefficients, little_r, mu,
                                pushforward_beta, r_slopes, straighten, transformed_curves,
                                transformed_sde_coeffs)


def removal(positions, betas, T=1.0):
    fam = CurveFamily.static(positions, T)
    return RemovalTransform(fam, SkewnessSchedule.constant(betas, T))


def moving_problem():
    fam = CurveFamily.from_specs([("sinusoid", (-0.5, 0.3, 2.0, 0.0)), ("linear", (0.5, 0.4)),
                                  ("sinusoid", (2.0, 0.2, 1.0, 1.0))], 1.0, gap=0.1)
    beta = SkewnessSchedule((("sinusoid", (0.2, 0.3, 1.5, 0.0)), ("affine", (-0.4, 0.3)), 0.6), 1.0)
    return RemovalTransform(fam, beta)


@pytest.mark.parametrize("x,expected", [(-1.0, 1.0), (0.5, 0.5)])
def test_mu_single(x, expected):
    assert mu(removal([0.0], [1 / 3]), 0.3, x) == pytest.approx(expected, abs=1e-15)


def test_mu_identity_and_product():
    assert mu(removal([0.0, 1.0], [0.0, 0.0]), 0.5, np.linspace(-3, 3, 7)).tolist() == [1.0] * 7
    assert mu(removal([0.0, 1.0], [1 / 3, 1 / 3]), 0.5, 2.0) == pytest.approx(0.25, abs=1e-15)


@pytest.mark.parametrize("x,expected", [(-2.0, -2.0), (2.0, 1.0)])
def test_R_single(x, expected):
    assert big_R(removal([0.0], [1 / 3]), 0.0, x) == pytest.approx(expected, abs=1e-15)


def test_r_single():
    assert little_r(removal([0.0], [1 / 3]), 0.0, 1.0) == pytest.approx(2.0, abs=1e-15)


def test_R_two_interfaces_against_quadrature():
    tr = removal([0.0, 1.0], [1 / 3, 1 / 3])
    assert big_R(tr, 0.0, 3.0) == pytest.approx(1.0, abs=1e-15)
    for x in (-1.3, 0.4, 2.7):
        assert big_R(tr, 0.0, x) == pytest.approx(piecewise_R([0.0, 1.0], [1 / 3, 1 / 3], x), abs=1e-12)


def test_zero_beta_is_shift():
    fam = CurveFamily.from_specs([("linear", (0.0, 1.0))], 1.0)
    tr = RemovalTransform(fam, SkewnessSchedule.constant([0.0], 1.0))
    x = np.linspace(-2, 2, 9)
    assert np.allclose(big_R(tr, 0.6, x), x - 0.6, atol=1e-15)
    assert np.allclose(little_r(tr, 0.6, x), x + 0.6, atol=1e-15)


def test_transformed_curves():
    assert transformed_curves(removal([0.0, 1.0], [1 / 3, 0.2]), 0.5)[1] == pytest.approx(0.5, abs=1e-15)
    assert np.allclose(transformed_curves(removal([0.0, 1.0], [0.0, 0.0]), 0.5), [0.0, 1.0])


@given(st.floats(0, 1))
def test_first_transformed_curve_is_zero(t):
    assert transformed_curves(moving_problem(), t)[0] == 0.0


@settings(max_examples=50)
@given(st.floats(0, 1), st.floats(-1e3, 1e3))
def test_round_trip(t, x):
    snap = moving_problem().at(t)
    assert abs(snap.r(snap.R(x)) - x) <= 1e-12 * (1 + abs(x))


@settings(max_examples=50)
@given(st.floats(0, 1), st.floats(-10, 10), st.floats(1e-6, 5))
def test_R_monotone_with_min_slope(t, x, d):
    tr = moving_problem()
    m_mu = tr.slope_bounds()[0]
    snap = tr.at(t)
    assert snap.R(x + d) - snap.R(x) >= m_mu * d * (1 - 1e-12)


def test_local_time_removal_and_inverse():
    tr = moving_problem()
    for t in np.linspace(0, 1, 11):
        for i in (1, 2, 3):
            b = tr.beta.value(i, t)
            assert abs(pushforward_beta(*R_slopes(tr, t, i), b)) <= 1e-14
            assert abs(pushforward_beta(*r_slopes(tr, t, i), 0.0) - b) <= 1e-14


@pytest.mark.parametrize("plus,minus,beta,expected", [
    (1.0, 1.0, 0.4, 0.4),
    (0.5, 1.0, 1 / 3, 0.0),
    (2.0, 1.0, 0.0, 1 / 3),
])
def test_pushforward_examples(plus, minus, beta, expected):
    assert pushforward_beta(plus, minus, beta) == pytest.approx(expected, abs=1e-15)


def test_pushforward_rejects_nonpositive_slopes():
    with pytest.raises(TransformError):
        pushforward_beta(0.0, 1.0, 0.2)


def test_r_t_against_finite_difference():
    tr = moving_problem()
    t = 0.4
    ys = np.array([-2.3, -0.7, 0.35, 1.9, 3.1])
    exact = tr.at(t).r_t(ys)
    errs = []
    for h in (1e-3, 1e-4):
        fd = (tr.at(t + h).r(ys) - tr.at(t - h).r(ys)) / (2 * h)
        errs.append(np.abs(fd - exact).max())
    assert errs[1] < 1e-7
    assert math.log10(errs[0] / errs[1]) >= 1.9


def test_sigma_bar_single_interface():
    # sigma_bar = sigma / r'_y with r'_y = 1 (left), 2 (right)
    p = ProblemSpec.skew_bm(1 / 3)
    tp = transformed_sde_coeffs(RemovalTransform(p.family, p.beta), p.sigma, p.b)
    sb, bb, _ = tp.coefficients(0.5, np.array([-1.0, 1.0]))
    assert np.allclose(sb, [1.0, 0.5], rtol=1e-15)
    assert np.all(bb == 0.0)
    # on the curve r'_y is the average 1.5
    assert tp.sigma_bar(0.5, 0.0) == pytest.approx(2 / 3)


def test_sigma_bar_identity_for_zero_beta():
    fam = CurveFamily.static([0.0], 1.0, gap=1.0)
    sig = PiecewiseCoefficient(fam, (("arctan", (1.0, 0.1, 1.0)),), 0.8, 1.2)
    b = PiecewiseCoefficient(fam, (("sinusoid_x", (0.0, 0.5, 1.0, 0.0)),), None, 0.5)
    tp = transformed_sde_coeffs(RemovalTransform(fam, SkewnessSchedule.constant([0.0], 1.0)), sig, b)
    y = np.linspace(-3, 3, 13)
    sb, bb, x = tp.coefficients(0.3, y)
    assert np.allclose(sb, sig(0.3, y)) and np.allclose(bb, b(0.3, y))


def test_b_bar_moving_curve_shift():
    fam = CurveFamily.from_specs([("linear", (0.0, 1.0))], 1.0)
    p = ProblemSpec(PiecewiseCoefficient.constant(fam, 1.0, 1.0, 1.0),
                    PiecewiseCoefficient.constant(fam, 0.25, None, 0.25),
                    SkewnessSchedule.constant([0.0], 1.0), fam)
    tp = transformed_sde_coeffs(RemovalTransform(fam, p.beta), p.sigma, p.b)
    assert np.allclose(tp.b_bar(0.5, np.linspace(-2, 2, 5)), 0.25 - 1.0)


def test_transformed_bounds():
    p = ProblemSpec.skew_bm(1 / 3)
    tp = transformed_sde_coeffs(RemovalTransform(p.family, p.beta), p.sigma, p.b)
    assert tp.m_bar == pytest.approx(0.5) and tp.M_bar == pytest.approx(1.0)


# straightening

def test_straighten_identity():
    st_ = straighten(CurveFamily.static([1.0, 2.0, 3.0], 1.0))
    x = np.linspace(0, 4, 9)
    assert np.allclose(st_.Psi(0.5, x), x)
    assert np.allclose(st_.Psi_x(0.5, x), 1.0) and np.allclose(st_.Psi_t(0.5, x), 0.0)


def test_straighten_affine_interpolation():
    assert straighten(CurveFamily.static([0.0, 2.0, 3.0], 1.0)).Psi(0.0, 1.0) == 1.5


def test_straighten_translation():
    fam = CurveFamily.from_specs([("linear", (0.0, 1.0)), ("linear", (1.0, 1.0)), ("linear", (2.0, 1.0))], 1.0)
    st_ = straighten(fam)
    t, x = 0.3, 1.8
    assert st_.Psi(t, x) == pytest.approx(x - t + 1)
    assert st_.Psi_t(t, x) == pytest.approx(-1.0)


@given(st.floats(0, 1))
def test_straighten_anchors_exact(t):
    tr = moving_problem()
    st_ = straighten(tr.family)
    assert st_.Psi(t, tr.family.positions(t)).tolist() == [1.0, 2.0, 3.0]


@settings(max_examples=50)
@given(st.floats(0, 1), st.floats(-5, 5))
def test_straighten_round_trip(t, x):
    st_ = straighten(moving_problem().family)
    assert abs(st_.psi(t, st_.Psi(t, x)) - x) <= 1e-12 * (1 + abs(x))


def test_straighten_pads_small_families():
    st1 = straighten(CurveFamily.static([0.0], 1.0, gap=0.5))
    assert st1.n == 3 and st1.physical == (2,)
    assert st1.Psi(0.0, 0.0) == 2.0
    st2 = straighten(CurveFamily.static([0.0, 1.0], 1.0))
    assert st2.n == 3 and st2.physical == (1, 2)


def test_straighten_crossing_curves():
    fam = CurveFamily.from_specs([("sinusoid", (0.0, 1.0, 1.0, 0.0)), ("constant", (0.5,)),
                                  ("constant", (2.0,))], 2.0, gap=0.1)
    with pytest.raises(TransformError):
        straighten(fam)


def test_straighten_slope_bounds():
    lo, hi = straighten(moving_problem().family).slope_bounds()
    assert 0 < lo <= hi


def test_hat_coefficients_cylindrical_identity():
    fam = CurveFamily.static([1.0, 2.0, 3.0], 1.0)
    sig = PiecewiseCoefficient(fam, (1.0, 1.5, 2.0, 1.2), 1.0, 2.0)
    b = PiecewiseCoefficient(fam, (("sinusoid_x", (0.0, 0.5, 1.0, 0.0)),), None, 0.5)
    beta = SkewnessSchedule.constant([0.2, -0.3, 0.5], 1.0)
    hat = hat_coefficients(straighten(fam), sig, b, beta)
    x = np.array([0.3, 1.5, 2.5, 3.7])
    assert np.allclose(hat.sigma(0.4, x), sig(0.4, x))
    assert np.allclose(hat.b(0.4, x), b(0.4, x))
    assert np.allclose(hat.beta.values(0.4), [0.2, -0.3, 0.5])


def test_hat_drift_translation():
    fam = CurveFamily.from_specs([("linear", (1.0, 1.0)), ("linear", (2.0, 1.0)), ("linear", (3.0, 1.0))], 1.0)
    sig = PiecewiseCoefficient.constant(fam, 1.0, 1.0, 1.0)
    b = PiecewiseCoefficient.constant(fam, 0.3, None, 0.3)
    hat = hat_coefficients(straighten(fam), sig, b, SkewnessSchedule.constant([0.1, 0.1, 0.1], 1.0))
    assert np.allclose(hat.b(0.5, np.array([1.5, 2.5])), 0.3 - 1.0)


def test_hat_beta_equal_segments():
    fam = CurveFamily.static([0.0, 1.0, 2.0], 1.0)
    sig = PiecewiseCoefficient.constant(fam, 1.0, 1.0, 1.0)
    hat = hat_coefficients(straighten(fam), sig, sig, SkewnessSchedule.constant([0.1, 0.4, -0.2], 1.0))
    assert hat.beta.values(0.0)[1] == pytest.approx(0.4, abs=1e-15)


# divergence form

def test_triple_single_interface():
    p = ProblemSpec.skew_bm(1 / 3)
    tri = divergence_triple(p.sigma, p.b, p.beta, p.family)
    assert tri.a(0.0, -1.0) == 1.0 and tri.a(0.0, 1.0) == pytest.approx(2.0)
    assert tri.rho(0.0, -1.0) == 1.0 and tri.rho(0.0, 1.0) == pytest.approx(0.5)
    assert beta_from_a(2.0, 1.0) == pytest.approx(1 / 3)


def test_triple_zero_beta():
    fam = CurveFamily.static([0.0], 1.0, gap=1.0)
    sig = PiecewiseCoefficient(fam, (1.0, 2.0), 1.0, 2.0)
    b = PiecewiseCoefficient(fam, (0.1, -0.1), None, 0.1)
    tri = divergence_triple(sig, b, SkewnessSchedule.constant([0.0], 1.0), fam)
    x = np.array([-1.0, 1.0])
    assert tri.a(0.0, x).tolist() == [1.0, 1.0]
    assert np.allclose(tri.rho(0.0, x), sig(0.0, x) ** 2)
    assert np.allclose(tri.B(0.0, x), b(0.0, x))


def test_triple_dictionary_consistency():
    tr = moving_problem()
    fam = tr.family
    sig = PiecewiseCoefficient(fam, (1.0, 1.5, 0.8, 1.2), 0.8, 1.5)
    tri = divergence_triple(sig, sig, tr.beta, fam, scale=2.0)
    x = np.linspace(-3, 4, 29)
    for t in np.linspace(0, 1, 7):
        for side in ("left", "right"):
            assert np.allclose(tri.rho(t, x, side) * tri.a(t, x, side), sig(t, x, side) ** 2,
                               rtol=1e-12, atol=0)
        for i, xi in enumerate(fam.positions(t), 1):
            got = beta_from_a(tri.a(t, xi, "right"), tri.a(t, xi, "left"))
            assert abs(got - tr.beta.value(i, t)) <= 1e-14
