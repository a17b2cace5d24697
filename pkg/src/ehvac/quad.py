"""Special functions and adaptive quadrature for proper-time integrals.

Everything downstream reduces to integrals of the form

    int_0^inf  w(s) g(s) s^(-p) ds

with a weight ``w`` that decays like ``exp(-s m^2)``.  The integrator works on
``u = log s`` where power-law times exponential integrands are smooth and
roughly bell shaped, and it accepts vector-valued integrands so that whole
batches of field strengths (or kernel sample points) share one refinement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import ConvergenceError, DomainError

# Gauss-Kronrod 7/15 abscissae and weights (QUADPACK qk15).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# Full 15-point node set on [-1, 1] in ascending order.
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KWEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GWEIGHTS = np.zeros(15)
# Gauss nodes are xgk[1], xgk[3], xgk[5], xgk[7]
for _i, _w in zip((1, 3, 5), _WG[:3]):
    _GWEIGHTS[_i] = _w
    _GWEIGHTS[14 - _i] = _w
_GWEIGHTS[7] = _WG[3]


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and budgets for proper-time quadrature.

    ``split_point=None`` means "use 1/m0^2 of whatever mass scale the caller
    integrates against".
    """

    rel_tol: float = 1e-11
    abs_tol: float = 0.0
    max_subdivisions: int = 4000
    split_point: float | None = None

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise DomainError(f"rel_tol must be > 0, got {self.rel_tol}")
        if not self.abs_tol >= 0:
            raise DomainError(f"abs_tol must be >= 0, got {self.abs_tol}")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be >= 1")
        if self.split_point is not None and not self.split_point > 0:
            raise DomainError(f"split_point must be > 0, got {self.split_point}")

    def split_for(self, mass_sq: float) -> float:
        return self.split_point if self.split_point is not None else 1.0 / mass_sq


DEFAULT_CONFIG = QuadratureConfig()


@dataclass
class QuadResult:
    value: np.ndarray | float
    error: np.ndarray | float
    n_intervals: int


# --------------------------------------------------------------------------
# Bernoulli numbers and the x coth x expansions
# --------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _bernoulli_table(m_max: int) -> tuple[Fraction, ...]:
    # B_0..B_m_max from sum_{k<=m} C(m+1, k) B_k = 0
    table = [Fraction(1)]
    for m in range(1, m_max + 1):
        acc = Fraction(0)
        binom = 1  # C(m+1, 0)
        for k in range(m):
            acc += binom * table[k]
            binom = binom * (m + 1 - k) // (k + 1)
        table.append(-acc / (m + 1))
    return tuple(table)


def bernoulli_even(n: int) -> Fraction:
    """Exact Bernoulli number B_{2n} for 1 <= n <= 64 (B_2 = 1/6)."""
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= 64:
        raise DomainError(f"bernoulli_even needs an integer 1 <= n <= 64, got {n!r}")
    return _bernoulli_table(128)[2 * int(n)]


@lru_cache(maxsize=None)
def _xcothx_coefficients(n_terms: int = 22) -> np.ndarray:
    # x coth x = sum_n 2^{2n} B_{2n} x^{2n} / (2n)!
    coeffs = []
    for n in range(1, n_terms + 1):
        c = Fraction(2 ** (2 * n)) * bernoulli_even(n) / math.factorial(2 * n)
        coeffs.append(float(c))
    return np.array(coeffs)


_SERIES_CUTOFF = 1.0


def _series(x2: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    # sum_k coeffs[k] * x2^(k+1), Horner in x^2
    acc = np.zeros_like(x2)
    for c in coeffs[::-1]:
        acc = acc * x2 + c
    return acc * x2


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def coth_reduced(x):
    """L(x) = x coth(x) - 1 for x >= 0, accurate to a few ulps everywhere.

    Below ``x = 1`` the Bernoulli series is summed (22 terms, truncation
    below 1e-19); above it the closed form has no cancellation.
    """
    arr, scalar = _as_array(x)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError("coth_reduced is defined for x >= 0")
    out = np.empty_like(arr)
    small = arr < _SERIES_CUTOFF
    xs = arr[small]
    out[small] = _series(xs * xs, _xcothx_coefficients())
    xl = arr[~small]
    out[~small] = xl / np.tanh(xl) - 1.0
    return float(out) if scalar else out


def coth_subtracted(x):
    """x coth(x) - 1 - x^2/3, the renormalised Euler-Heisenberg kernel.

    Starts at -x^4/45; the fused series avoids the total loss of digits the
    naive subtraction suffers for small x.
    """
    arr, scalar = _as_array(x)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError("coth_subtracted is defined for x >= 0")
    out = np.empty_like(arr)
    small = arr < _SERIES_CUTOFF
    xs = arr[small]
    x2 = xs * xs
    out[small] = _series(x2, _xcothx_coefficients()[1:]) * x2
    xl = arr[~small]
    out[~small] = xl / np.tanh(xl) - 1.0 - xl * xl / 3.0
    return float(out) if scalar else out


def expm1_tail(x):
    """exp(-x) - 1 + x without cancellation (x >= 0)."""
    arr, scalar = _as_array(x)
    out = np.empty_like(arr)
    small = arr < 1.0
    out[small] = _expm1_tail_series(arr[small])
    xl = arr[~small]
    out[~small] = np.expm1(-xl) + xl
    return float(out) if scalar else out


def _expm1_tail_series(x: np.ndarray) -> np.ndarray:
    # x^2 * sum_{k>=0} (-x)^k / (k+2)!
    acc = np.zeros_like(x)
    for k in range(20, -1, -1):
        acc = acc * (-x) + 1.0 / math.factorial(k + 2)
    return acc * x * x


# --------------------------------------------------------------------------
# Adaptive Gauss-Kronrod
# --------------------------------------------------------------------------

def _gk_batch(f, lo: np.ndarray, hi: np.ndarray):
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    nodes = center[:, None] + half[:, None] * _NODES[None, :]
    vals = np.asarray(f(nodes.ravel()), dtype=float)
    vals = vals.reshape(len(lo), 15, -1)
    kron = np.einsum("ijk,j->ik", vals, _KWEIGHTS) * half[:, None]
    gauss = np.einsum("ijk,j->ik", vals, _GWEIGHTS) * half[:, None]
    return kron, np.abs(kron - gauss)


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    *,
    rel_tol: float = 1e-11,
    abs_tol: float = 0.0,
    max_subdivisions: int = 4000,
    breakpoints=(),
    initial: int = 8,
) -> QuadResult:
    """Adaptive G7/K15 quadrature of a vectorised, possibly vector-valued ``f``.

    ``f`` maps a 1-D array of nodes to an array of shape ``(k,)`` or
    ``(k, m)``.  Each component must meet ``max(abs_tol, rel_tol*|I_c|)``.
    After the error estimate converges, every interval is bisected once more
    and the doubled-node result must agree within tolerance before it is
    returned.
    """
    edges = np.unique(np.concatenate([
        np.linspace(a, b, initial + 1),
        [p for p in breakpoints if a < p < b],
    ]))
    lo, hi = edges[:-1], edges[1:]
    kron, err = _gk_batch(f, lo, hi)
    vector = kron.shape[1]
    verified = False

    while True:
        order = np.argsort(lo, kind="stable")
        lo, hi, kron, err = lo[order], hi[order], kron[order], err[order]
        total = kron.sum(axis=0)
        total_err = err.sum(axis=0)
        tol = np.maximum(abs_tol, rel_tol * np.abs(total))
        ok = np.all(total_err <= tol)

        if ok and not verified:
            # node doubling: bisect everything, compare
            mid = 0.5 * (lo + hi)
            lo2 = np.concatenate([lo, mid])
            hi2 = np.concatenate([mid, hi])
            k2, e2 = _gk_batch(f, lo2, hi2)
            total2 = k2.sum(axis=0)
            diff = np.abs(total2 - total)
            lo, hi, kron, err = lo2, hi2, k2, e2
            tol2 = np.maximum(abs_tol, rel_tol * np.abs(total2))
            if np.all(diff <= tol2):
                order = np.argsort(lo, kind="stable")
                total2 = k2[order].sum(axis=0)
                final_err = np.maximum(diff, e2.sum(axis=0))
                value = total2 if vector > 1 else float(total2[0])
                ferr = final_err if vector > 1 else float(final_err[0])
                return QuadResult(value, ferr, len(lo))
            continue
        if ok:
            value = total if vector > 1 else float(total[0])
            return QuadResult(value, total_err if vector > 1 else float(total_err[0]), len(lo))

        if len(lo) >= max_subdivisions:
            raise ConvergenceError(
                f"quadrature did not converge within {max_subdivisions} subintervals",
                estimate=total if vector > 1 else float(total[0]),
                residual=total_err if vector > 1 else float(total_err[0]),
            )

        with np.errstate(divide="ignore", invalid="ignore"):
            norm = np.where(tol > 0, err / np.where(tol > 0, tol, 1.0), np.where(err > 0, np.inf, 0.0))
        score = norm.max(axis=1)
        threshold = max(score.max() * 0.25, 1.0 / len(lo))
        split = score >= threshold
        split[np.argmax(score)] = True
        keep = ~split
        mid = 0.5 * (lo[split] + hi[split])
        new_lo = np.concatenate([lo[split], mid])
        new_hi = np.concatenate([mid, hi[split]])
        nk, ne = _gk_batch(f, new_lo, new_hi)
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        kron = np.concatenate([kron[keep], nk])
        err = np.concatenate([err[keep], ne])
        verified = False


def _weight_and_rate(weight):
    """Return (w(s) callable, decay rate m_min^2) for a scheme or single mass."""
    if hasattr(weight, "masses") and hasattr(weight, "coefficients"):
        from .pvscheme import pv_weight

        return (lambda s: pv_weight(s, weight)), float(weight.m0) ** 2
    mu = float(weight)
    if not mu > 0:
        raise DomainError(f"single-mass weight needs mu > 0, got {mu}")
    return (lambda s: np.exp(-s * mu * mu)), mu * mu


def proper_time_integrate(
    g: Callable[[np.ndarray], np.ndarray],
    p: float,
    weight,
    cfg: QuadratureConfig | None = None,
    *,
    prefactor: float = 1.0,
    small_s_order: float = 1.0,
    scale: float = 1.0,
    full_output: bool = False,
):
    """prefactor * int_0^inf w(s) g(s) s^(-p) ds.

    ``weight`` is a :class:`~ehvac.pvscheme.PvScheme` (weight
    ``sum_j c_j exp(-s m_j^2)``) or a positive mass ``mu`` (weight
    ``exp(-s mu^2)``).  ``small_s_order`` is the power q with
    ``w g s^-p ~ s^q`` as s -> 0 (used for the analytic lower tail), and
    ``scale`` is the largest inverse proper time present in ``g`` (field
    strength, omega^2, 1/r^2, ...), which sets how far towards s = 0 the
    integration window must reach.
    """
    cfg = cfg or DEFAULT_CONFIG
    w, rate = _weight_and_rate(weight)
    split = cfg.split_for(rate)
    s_lo = 1e-12 * min(split, 1.0 / max(scale, 1e-300))
    s_hi = max(split, 1.0 / rate) * 60.0

    def integrand_s(s):
        vals = np.asarray(g(s), dtype=float)
        fac = w(s) * s ** (-p)
        return vals * (fac[:, None] if vals.ndim == 2 else fac)

    def integrand_u(u):
        s = np.exp(u)
        vals = integrand_s(s)
        return vals * (s[:, None] if vals.ndim == 2 else s)

    res = integrate(
        integrand_u, math.log(s_lo), math.log(s_hi),
        rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol / max(abs(prefactor), 1e-300),
        max_subdivisions=cfg.max_subdivisions,
        breakpoints=(math.log(split),), initial=16,
    )
    ends = integrand_s(np.array([s_lo, s_hi]))
    lower_tail = ends[0] * s_lo / (small_s_order + 1.0)
    upper_tail = ends[1] / rate
    value = (np.asarray(res.value) + lower_tail + upper_tail) * prefactor
    error = (np.asarray(res.error) + np.abs(lower_tail) + np.abs(upper_tail)) * abs(prefactor)
    if np.ndim(value) == 0 or (np.ndim(value) == 1 and np.size(value) == 1 and np.ndim(res.value) == 0):
        value, error = float(np.squeeze(value)), float(np.squeeze(error))
    if full_output:
        return QuadResult(value, error, res.n_intervals)
    return value
