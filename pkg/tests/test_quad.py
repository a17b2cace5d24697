import math
from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ehvac.errors import ConvergenceError, DomainError
from ehvac.quad import (
    QuadratureConfig,
    bernoulli_even,
    coth_reduced,
    coth_subtracted,
    expm1_tail,
    integrate,
    proper_time_integrate,
)


def _coth_reduced_mp(x):
    with mp.workdps(50):
        x = mp.mpf(x)
        return float(x * mp.coth(x) - 1)


def test_coth_reduced_known_values():
    assert coth_reduced(0.0) == 0.0
    # x coth x - 1 at x = ln 2 is (5/3) ln 2 - 1
    assert coth_reduced(math.log(2)) == pytest.approx(5 / 3 * math.log(2) - 1, rel=1e-15)


def test_coth_reduced_small_x_series():
    for x in (1e-8, 1e-4, 1e-2):
        assert coth_reduced(x) == pytest.approx(x * x / 3 - x ** 4 / 45, rel=1e-12)


@pytest.mark.parametrize("x", [0.3, 0.999999, 1.0, 1.000001, 2.5, 40.0, 800.0])
def test_coth_reduced_matches_mpmath_across_switchover(x):
    assert coth_reduced(x) == pytest.approx(_coth_reduced_mp(x), rel=2e-15)


@pytest.mark.parametrize("x", [1e-3, 0.5, 0.99, 1.01, 7.0, 300.0])
def test_coth_subtracted_matches_mpmath(x):
    with mp.workdps(60):
        ref = float(mp.mpf(x) * mp.coth(x) - 1 - mp.mpf(x) ** 2 / 3)
    assert coth_subtracted(x) == pytest.approx(ref, rel=1e-13)


def test_coth_negative_raises():
    with pytest.raises(DomainError):
        coth_reduced(-0.1)
    with pytest.raises(DomainError):
        coth_subtracted(np.array([0.1, -1.0]))


@given(st.floats(min_value=1e-6, max_value=500.0))
@settings(max_examples=60, deadline=None)
def test_coth_reduced_bounds(x):
    v = coth_reduced(x)
    # 0 <= x coth x - 1 <= x and <= x^2/3
    assert 0 <= v <= x * (1 + 1e-15)
    assert v <= x * x / 3 * (1 + 1e-14)


def test_expm1_tail_against_mpmath():
    for x in (1e-9, 1e-3, 0.2, 3.0):
        with mp.workdps(40):
            ref = float(mp.exp(-x) - 1 + x)
        assert expm1_tail(x) == pytest.approx(ref, rel=1e-14)


def test_bernoulli_values():
    assert bernoulli_even(1) == Fraction(1, 6)
    assert bernoulli_even(2) == Fraction(-1, 30)
    assert bernoulli_even(3) == Fraction(1, 42)
    assert bernoulli_even(6) == Fraction(-691, 2730)


def test_bernoulli_against_mpmath_oracle():
    for n in (4, 10, 25, 40, 64):
        with mp.workdps(120):
            ref = mp.bernoulli(2 * n)
            assert mp.almosteq(mp.mpf(bernoulli_even(n).numerator) / bernoulli_even(n).denominator,
                               ref, rel_eps=mp.mpf(10) ** -100)


def test_bernoulli_signs_alternate():
    signs = [np.sign(bernoulli_even(n)) for n in range(1, 65)]
    assert all(signs[k] == (-1) ** k for k in range(64))


def test_bernoulli_range():
    for bad in (0, 65, -2):
        with pytest.raises(DomainError):
            bernoulli_even(bad)


def test_integrate_polynomial_and_vector_valued():
    res = integrate(lambda t: np.stack([t ** 2, np.cos(t)], axis=1), 0.0, 2.0, rel_tol=1e-13)
    assert res.value[0] == pytest.approx(8 / 3, rel=1e-13)
    assert res.value[1] == pytest.approx(math.sin(2.0), rel=1e-13)
    assert np.all(res.error >= 0)


def test_integrate_is_bitwise_deterministic():
    f = lambda t: np.exp(-t) * np.sin(5 * t) ** 2
    a = integrate(f, 0.0, 10.0).value
    b = integrate(f, 0.0, 10.0).value
    assert a == b


def test_integrate_budget_exhaustion_carries_estimate():
    with pytest.raises(ConvergenceError) as info:
        integrate(lambda t: np.abs(np.sin(200 * t)) ** 0.3, 0.0, 10.0, rel_tol=1e-14, max_subdivisions=10)
    assert info.value.estimate is not None
    assert info.value.residual is not None


def test_proper_time_examples():
    # int exp(-s) s^(-1/2) ds = sqrt(pi), written with p = 1/2
    cfg = QuadratureConfig(rel_tol=1e-12)
    v = proper_time_integrate(lambda s: np.ones_like(s), 0.5, 1.0, cfg, small_s_order=-0.5)
    assert v == pytest.approx(math.sqrt(math.pi), rel=1e-10)
    # int exp(-s) exp(-1/(4s)) s^-3/2 ds /(4 pi)^{3/2} * (4 pi) ... heat kernel to resolvent:
    # int exp(-s) (4 pi s)^-3/2 exp(-r^2/4s) ds = exp(-r)/(4 pi r) at r = 1
    g = lambda s: np.exp(-1.0 / (4 * s)) / (4 * math.pi) ** 1.5
    v = proper_time_integrate(g, 1.5, 1.0, cfg, small_s_order=10.0)
    assert v == pytest.approx(math.exp(-1) / (4 * math.pi), rel=1e-10)


def test_proper_time_full_output_and_zero():
    r = proper_time_integrate(lambda s: np.zeros_like(s), 2.0, 1.0, full_output=True)
    assert r.value == 0.0
    assert r.n_intervals > 0


@given(st.floats(0.1, 5.0), st.floats(-3.0, 3.0))
@settings(max_examples=15, deadline=None)
def test_proper_time_linearity(mu, alpha):
    cfg = QuadratureConfig(rel_tol=1e-12)
    g1 = lambda s: s * s
    g2 = lambda s: np.exp(-s)
    a = proper_time_integrate(lambda s: g1(s) + alpha * g2(s), 0.0, mu, cfg, small_s_order=0.0)
    b = proper_time_integrate(g1, 0.0, mu, cfg, small_s_order=2.0) + alpha * proper_time_integrate(
        g2, 0.0, mu, cfg, small_s_order=0.0)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-12)


def test_config_validation():
    with pytest.raises(DomainError):
        QuadratureConfig(rel_tol=0)
    with pytest.raises(DomainError):
        QuadratureConfig(abs_tol=-1)
    with pytest.raises(DomainError):
        QuadratureConfig(max_subdivisions=0)
    with pytest.raises(DomainError):
        QuadratureConfig(split_point=-2.0)
    assert QuadratureConfig(split_point=0.5).split_for(4.0) == 0.5
    assert QuadratureConfig().split_for(4.0) == 0.25
