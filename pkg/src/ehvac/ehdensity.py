"""Renormalised Euler-Heisenberg vacuum energy in a magnetic field."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UnsupportedRegimeError
from .quad import DEFAULT_CONFIG, QuadratureConfig, bernoulli_even, coth_subtracted, proper_time_integrate


def f_eh(x, mass: float = 1.0, cfg: QuadratureConfig | None = None):
    """f_eh(x) = (1/8pi^2) int e^{-m^2 s}(sx coth sx - 1 - (sx)^2/3) s^-3 ds.

    Nonpositive, concave and decreasing in ``x`` = e|B|; behaves like
    -x^4/(360 pi^2 m^4) for weak and -x^2 log(x)/(24 pi^2) for strong fields.
    Accepts arrays.
    """
    cfg = cfg or DEFAULT_CONFIG
    if not mass > 0:
        raise DomainError(f"mass must be > 0, got {mass}")
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(~np.isfinite(arr)):
        raise DomainError("f_eh needs finite x >= 0")
    flat = np.atleast_1d(arr).ravel()
    out = np.zeros_like(flat)
    live = flat > 0
    if np.any(live):
        xs = np.unique(flat[live])

        def g(s):
            return coth_subtracted(np.outer(s, xs)) if len(xs) > 1 else coth_subtracted(s * xs[0])

        vals = proper_time_integrate(
            g, 3.0, float(mass), cfg, prefactor=1.0 / (8 * math.pi ** 2),
            small_s_order=1.0, scale=float(xs.max()),
        )
        vals = np.atleast_1d(vals)
        out[live] = vals[np.searchsorted(xs, flat[live])]
    out = out.reshape(np.shape(arr))
    return float(out) if arr.ndim == 0 else out


def f_eh_derivative(x: float, mass: float = 1.0, cfg: QuadratureConfig | None = None) -> float:
    """d f_eh/dx from the x-differentiated integrand.

    d/dx [sx coth sx - 1 - (sx)^2/3] = s (coth u - u/sinh^2 u - 2u/3), u = sx.
    """
    cfg = cfg or DEFAULT_CONFIG
    if x == 0:
        return 0.0

    def g(s):
        u = s * x
        out = np.empty_like(u)
        small = u < 0.5
        us = u[small]
        # coth u - u/sinh^2 u - 2u/3 = -4u^3/45 + 4u^5/315 - 8u^7/1575 + ...
        # from differentiating the Bernoulli series
        from .quad import _xcothx_coefficients

        c = _xcothx_coefficients()
        acc = np.zeros_like(us)
        u2 = us * us
        for k in range(len(c) - 1, 0, -1):
            acc = acc * u2 + c[k] * (2 * (k + 1))
        out[small] = acc * u2 * us
        ul = u[~small]
        with np.errstate(over="ignore"):
            out[~small] = 1 / np.tanh(ul) - ul / np.sinh(ul) ** 2 - 2 * ul / 3
        return s * out

    return proper_time_integrate(g, 3.0, float(mass), cfg, prefactor=1.0 / (8 * math.pi ** 2),
                                 small_s_order=1.0, scale=x)


def f_eh_orthogonal(x_e: float, x_b: float, mass: float = 1.0,
                    cfg: QuadratureConfig | None = None, *, e_dot_b: float = 0.0) -> float:
    """Euler-Heisenberg energy for orthogonal E and B with |E| < |B|.

    Only the invariant xB^2 - xE^2 enters, so the value is f_eh(sqrt(xB^2 - xE^2)).
    """
    if e_dot_b != 0:
        raise UnsupportedRegimeError("fields with E.B != 0 are not supported")
    if x_e < 0 or x_b < 0:
        raise DomainError("field strengths must be nonnegative")
    if x_e >= x_b and not (x_e == 0 and x_b == 0):
        raise UnsupportedRegimeError("|E| >= |B| lies in the pair-production regime")
    return f_eh(math.sqrt((x_b - x_e) * (x_b + x_e)), mass, cfg)


@dataclass(frozen=True)
class EhSeries:
    """Weak-field Taylor coefficients: f_eh(x) ~ sum_n coefficients[n] x^(2n)."""

    mass: float
    coefficients: tuple[tuple[int, float], ...]

    def orders(self) -> list[int]:
        return [o for o, _ in self.coefficients]

    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.coefficients])

    def terms(self, x: float) -> np.ndarray:
        return np.array([v * x ** o for o, v in self.coefficients])


def taylor_coefficient(n: int, mass: float = 1.0) -> float:
    """Coefficient of x^(2n): (m^4/8pi^2) B_2n / (2n(2n-1)(2n-2)) (2/m^2)^(2n)."""
    b = bernoulli_even(n)
    k = 2 * n
    # work in logs so high orders neither overflow nor lose the sign
    mag = (math.log(abs(b.numerator)) - math.log(b.denominator) - math.log(k * (k - 1) * (k - 2))
           + k * math.log(2.0) + (4 - 2 * k) * math.log(mass) - math.log(8 * math.pi ** 2))
    return math.copysign(math.exp(mag), b.numerator)


def taylor_series(n_max: int, mass: float = 1.0) -> EhSeries:
    if not isinstance(n_max, (int, np.integer)) or not 2 <= n_max <= 64:
        raise DomainError(f"n_max must be an integer in [2, 64], got {n_max!r}")
    if not mass > 0:
        raise DomainError("mass must be > 0")
    return EhSeries(float(mass), tuple((2 * n, taylor_coefficient(n, mass)) for n in range(2, n_max + 1)))


def optimal_truncation_eval(x: float, mass: float = 1.0, n_max: int = 64) -> tuple[float, int, float]:
    """Sum the divergent weak-field series up to (not including) its smallest term.

    Returns (value, order of the last included term, first omitted term magnitude).
    """
    if x < 0:
        raise DomainError("x must be >= 0")
    if x > 0.3 * mass * mass:
        raise UnsupportedRegimeError(f"x = {x} is beyond the asymptotic regime x <= 0.3 m^2")
    if x == 0:
        return 0.0, 4, 0.0
    terms = taylor_series(n_max, mass).terms(x)
    mags = np.abs(terms)
    k = int(np.argmin(mags))
    if k == 0:
        k = 1
    value = math.fsum(terms[:k])
    return value, 2 * (k + 1), float(mags[k])
