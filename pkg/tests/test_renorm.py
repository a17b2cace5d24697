import math

import pytest
from hypothesis import given, settings, strategies as st

from ehvac.ehdensity import f_eh
from ehvac.errors import DomainError
from ehvac.pvscheme import make_scheme
from ehvac.renorm import bound_constant, bph_of, energy_difference, renormalize

S123 = make_scheme(1, 2, 3)


def test_renormalize_values():
    st_ = renormalize(1.0, S123)
    assert st_.z3 == pytest.approx(1 / (1 + 2 / (3 * math.pi) * S123.log_lambda), rel=1e-15)
    assert st_.z3 == pytest.approx(0.912857, abs=5e-6)
    assert st_.e_ph == pytest.approx(0.955435, abs=5e-6)
    assert bph_of(1.0, st_) == pytest.approx(1.046646, abs=5e-6)


@given(st.floats(0.05, 3.0), st.floats(0.0, 50.0))
@settings(max_examples=50, deadline=None)
def test_charge_field_product_invariant(e, b):
    st_ = renormalize(e, S123)
    assert 0 < st_.z3 < 1
    assert st_.e_ph * bph_of(b, st_) == pytest.approx(e * b, rel=1e-14, abs=1e-300)


def test_invalid_inputs():
    with pytest.raises(DomainError):
        renormalize(0.0, S123)
    st_ = renormalize(1.0, S123)
    with pytest.raises(DomainError):
        bph_of(-1.0, st_)
    with pytest.raises(DomainError):
        energy_difference(-1.0, st_)


def test_bound_constant_is_weak_field_limit():
    k = bound_constant(1.0)
    assert k == pytest.approx(2 / (360 * math.pi ** 2), rel=1e-12)
    for x in (1e-2, 0.5, 3.0, 100.0):
        assert 2 * abs(f_eh(x)) / x ** 4 <= k * (1 + 1e-12)


def test_bound_constant_mass_independent():
    k = bound_constant(1.0)
    for m in (0.5, 2.0):
        assert bound_constant(m) == pytest.approx(k, rel=1e-12)


@pytest.mark.parametrize("masses", [(1, 2, 3), (1, 10, 20)])
@pytest.mark.parametrize("e", [0.3, 0.5, 1.0])
@pytest.mark.parametrize("b", [0.5, 1.0])
def test_exact_cancellation_and_bound(masses, e, b):
    st_ = renormalize(e, make_scheme(*masses))
    d = energy_difference(b, st_)
    assert d.identity_residual < 1e-8 * d.scale
    assert d.within_bound


def test_zero_field_difference():
    d = energy_difference(0.0, renormalize(1.0, S123))
    assert d.difference == 0.0 and d.within_bound


def test_difference_suppressed_by_heavy_regulators():
    # larger regulator masses make the bare/physical gap smaller
    vals = []
    for m1 in (5.0, 10.0, 20.0):
        d = energy_difference(1.0, renormalize(0.5, make_scheme(1.0, m1, 2 * m1)))
        vals.append(abs(d.difference))
    assert vals[0] > vals[1] > vals[2]


def test_identity_has_no_quadratic_remainder():
    # c1 f_eh(x; m1) + c2 f_eh(x; m2) is quartic at weak field
    st_ = renormalize(1.0, S123)
    r = [energy_difference(b, st_).exact_identity_value / b ** 4 for b in (1e-2, 2e-2)]
    assert r[0] == pytest.approx(r[1], rel=1e-3)
