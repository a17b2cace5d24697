import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ehvac.errors import DomainError
from ehvac.landau import (
    GaussianLocalizer,
    LandauSpectrum,
    check_kernel_bounds,
    f_pv_omega,
    f_pv_via_omega,
    gradient_bound,
    heat_density_closed,
    landau_heat_density,
    landau_n_max,
    localized_heat_trace,
    pauli_heat_kernel,
    pauli_resolvent_gradient,
    pauli_resolvent_kernel,
    resolvent_bound,
)
from ehvac.pvscheme import f_pv, make_scheme
from ehvac.quad import QuadratureConfig

S123 = make_scheme(1, 2, 3)


def test_spectrum_levels_and_degeneracy():
    sp = LandauSpectrum(2.0, 3)
    assert sp.levels[:4] == ((0, -1, 0.0), (0, 1, 4.0), (1, -1, 4.0), (1, 1, 8.0))
    assert sp.degeneracy_density == pytest.approx(1 / math.pi)
    e = sp.energies()
    assert np.count_nonzero(e == 0) == 1  # a single zero mode per n_max window
    with pytest.raises(DomainError):
        LandauSpectrum(-1.0, 2)


def test_heat_density_example():
    h = landau_heat_density(1.0, 1.0)
    ref = (1 / math.tanh(1.0) - 1) / (4 * math.pi ** 1.5)
    assert h.closed_form == pytest.approx(ref, rel=1e-15)
    assert h.relative_gap < 1e-12


def test_heat_density_zero_field():
    h = landau_heat_density(2.0, 0.0)
    assert h.landau_route == 0.0 and h.closed_form == 0.0


def test_heat_density_weak_field_limit():
    # (sb coth sb - 1)/s^{3/2} -> b^2 s^{1/2}/3
    s, b = 1.0, 1e-4
    assert float(heat_density_closed(s, b)) == pytest.approx(b * b / (3 * 4 * math.pi ** 1.5), rel=1e-8)


def test_heat_density_grid_agreement():
    grid = np.geomspace(0.05, 20, 20)
    worst = max(landau_heat_density(s, b).relative_gap for s in grid for b in grid)
    assert worst < 1e-12


def test_truncation_warning():
    with pytest.warns(RuntimeWarning):
        landau_heat_density(0.05, 0.05, n_max=10)


def test_n_max_monotone_in_tolerance():
    assert landau_n_max(1.0, 1.0, rel_tol=1e-6) <= landau_n_max(1.0, 1.0, rel_tol=1e-12)
    assert landau_n_max(0.0, 1.0) == 0


def test_heat_kernel_free_limit():
    x = np.array([0.3, -0.2, 0.5])
    y = np.array([-0.1, 0.4, 0.0])
    k = pauli_heat_kernel(0.7, 0.0, x, y)
    r2 = np.sum((x - y) ** 2)
    free = math.exp(-r2 / 2.8) / (4 * math.pi * 0.7) ** 1.5
    assert k[0, 0] == pytest.approx(free, rel=1e-14)
    assert k[1, 1] == pytest.approx(free, rel=1e-14)
    assert k[0, 1] == 0


def test_heat_kernel_diagonal_trace():
    s, b = 1.0, 1.0
    tr = np.trace(pauli_heat_kernel(s, b, np.zeros(3), np.zeros(3))).real
    assert tr == pytest.approx(b / math.tanh(b) / (4 * math.pi ** 1.5), rel=1e-14)
    # listed as 0.0589516; coth(1)/(4 pi^1.5) is 0.05895106
    assert tr == pytest.approx(0.05895106, abs=5e-9)


@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6), st.floats(0.1, 3), st.floats(0, 3))
@settings(max_examples=40, deadline=None)
def test_heat_kernel_hermitian_symmetry(pts, s, b):
    x, y = np.array(pts[:3]), np.array(pts[3:])
    kxy = pauli_heat_kernel(s, b, x, y)
    kyx = pauli_heat_kernel(s, b, y, x)
    assert np.allclose(kxy, kyx.conj().T, rtol=1e-13, atol=1e-300)


def test_heat_kernel_semigroup():
    # int K(s, x, z) K(t, z, y) dz = K(s + t, x, y), checked by 3-D Gauss-Hermite-free quadrature
    s, t, b = 0.4, 0.6, 1.3
    x = np.array([0.3, -0.1, 0.2])
    y = np.array([-0.2, 0.25, -0.1])
    nodes, w = np.polynomial.legendre.leggauss(48)
    L = 7.0
    nodes, w = L * nodes, L * w
    z = np.stack(np.meshgrid(nodes, nodes, nodes, indexing="ij"), axis=-1).reshape(-1, 3)
    wz = (w[:, None, None] * w[None, :, None] * w[None, None, :]).ravel()
    k1 = pauli_heat_kernel(s, b, np.broadcast_to(x, z.shape), z)
    k2 = pauli_heat_kernel(t, b, z, np.broadcast_to(y, z.shape))
    lhs = np.einsum("n,nij,njk->ik", wz, k1, k2)
    rhs = pauli_heat_kernel(s + t, b, x, y)
    assert np.allclose(lhs, rhs, rtol=1e-9, atol=1e-12)


def test_localizer_normalised():
    for rho in (0.5, 2.0):
        assert GaussianLocalizer(rho).norm_squared() == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(DomainError):
        GaussianLocalizer(0.0)


@pytest.mark.parametrize("s,b", [(1.0, 1.0), (2.0, 3.0)])
def test_localized_trace_rho_independent(s, b):
    closed = localized_heat_trace(s, b, GaussianLocalizer(1.0), route="closed")
    vals = [localized_heat_trace(s, b, GaussianLocalizer(r)) for r in (0.25, 0.5, 1, 2, 4)]
    assert max(abs(v - closed) / closed for v in vals) < 1e-8


def test_localized_trace_bad_route():
    with pytest.raises(DomainError):
        localized_heat_trace(1.0, 1.0, GaussianLocalizer(1.0), route="spectral")


def test_resolvent_free_field():
    r = 1.3
    k = pauli_resolvent_kernel(1.0, 0.0, np.array([r, 0, 0]), np.zeros(3))
    assert k[0, 0].real == pytest.approx(math.exp(-r) / (4 * math.pi * r), rel=1e-10)
    k = pauli_resolvent_kernel(1.0, 1e-8, np.array([0, 0, 1.0]), np.zeros(3))
    assert abs(k[1, 1]) == pytest.approx(math.exp(-1) / (4 * math.pi), rel=1e-6)


def test_resolvent_coincident_points():
    with pytest.raises(DomainError):
        pauli_resolvent_kernel(1.0, 1.0, np.zeros(3), np.zeros(3))


def test_resolvent_swap_symmetry():
    x = np.array([0.4, -0.3, 0.2])
    y = np.array([-0.5, 0.1, 0.7])
    a = pauli_resolvent_kernel(1.5, 0.8, x, y)
    b = pauli_resolvent_kernel(1.5, 0.8, y, x)
    assert np.allclose(a, b.conj().T, rtol=1e-10)


def test_resolvent_gradient_matches_covariant_finite_difference():
    mu, b = 1.2, 0.9
    x = np.array([0.4, -0.3, 0.6])
    y = np.array([-0.2, 0.5, 0.1])
    grad = pauli_resolvent_gradient(mu, b, x, y)
    A = 0.5 * b * np.array([-x[1], x[0], 0.0])
    h = 1e-4
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        k = [pauli_resolvent_kernel(mu, b, x + c * e, y) for c in (-2, -1, 1, 2)]
        d = (k[0] - 8 * k[1] + 8 * k[2] - k[3]) / (12 * h)
        fd = -1j * d - A[j] * pauli_resolvent_kernel(mu, b, x, y)
        assert np.allclose(grad[j], fd, rtol=1e-6, atol=1e-9)


def test_kernel_bound_tight_at_zero_field():
    r = np.array([[0.5, 0.2, 0.1], [2.0, 0.0, 1.0]])
    k = np.abs(pauli_resolvent_kernel(1.0, 0.0, r, np.zeros((2, 3)))[:, 0, 0])
    assert np.allclose(k, resolvent_bound(1.0, 0.0, r), rtol=1e-9)


@pytest.mark.parametrize("mu,b", [(1.0, 0.5), (2.0, 2.0)])
def test_kernel_bounds_random_pairs(mu, b):
    rng = np.random.default_rng(7)
    samples = rng.uniform(-2, 2, size=(300, 2, 3))
    rep = check_kernel_bounds(mu, b, samples)
    assert rep.passed
    assert rep.violations() == []
    assert np.all(rep.kernel_margin >= 0) and np.all(rep.gradient_margin >= 0)


def test_kernel_bound_report_flags_violations():
    samples = np.array([[[0.5, 0.0, 0.0], [0.0, 0.0, 0.0]]])
    rep = check_kernel_bounds(1.0, 1.0, samples)
    rep.kernel_bound = rep.kernel_bound * 0.1
    assert not rep.passed
    assert len(rep.violations()) == 1


def test_gradient_bound_formula():
    r = np.array([[0.0, 2.0, 0.0]])
    v = (1 / (2 * math.pi) + 2 / (4 * math.pi) + 2 / (2 * math.pi) + 5 * 2 / (4 * math.pi)) * math.exp(-2)
    assert gradient_bound(1.0, 1.0, r)[0] == pytest.approx(v, rel=1e-14)


def test_f_pv_omega_basic():
    assert f_pv_omega(1.0, 0.0, S123) == 0.0
    w = np.geomspace(1e-3, 1e3, 30)
    v = f_pv_omega(w, 1.0, S123)
    assert np.all(v >= 0)
    assert np.all(np.diff(v) <= 0)
    with pytest.raises(DomainError):
        f_pv_omega(1.0, -1.0, S123)


@pytest.mark.parametrize("b", [0.1, 1.0, 10.0])
def test_omega_route_matches_direct(b):
    direct = f_pv(b, S123)
    assert abs(f_pv_via_omega(b, S123) - direct) / direct < 1e-7


def test_omega_route_zero_field():
    assert f_pv_via_omega(0.0, S123) == 0.0
