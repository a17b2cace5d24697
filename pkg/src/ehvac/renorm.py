"""Charge renormalisation linking f_pv to the physical Euler-Heisenberg energy."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from .ehdensity import f_eh
from .errors import DomainError
from .pvscheme import PvScheme, f_pv
from .quad import DEFAULT_CONFIG, QuadratureConfig


@dataclass(frozen=True)
class RenormState:
    e: float
    e_ph: float
    z3: float
    scheme: PvScheme


def renormalize(e: float, scheme: PvScheme) -> RenormState:
    """Z3 = 1/(1 + (2e^2/3pi) log Lambda), e_ph = sqrt(Z3) e."""
    if not e > 0:
        raise DomainError(f"charge must be > 0, got {e}")
    z3 = 1.0 / (1.0 + 2.0 * e * e / (3.0 * math.pi) * scheme.log_lambda)
    return RenormState(float(e), math.sqrt(z3) * e, z3, scheme)


def bph_of(b: float, state: RenormState) -> float:
    """Physical field b_ph = b e / e_ph = b / sqrt(Z3), so that e b = e_ph b_ph.

    Taking b_ph = sqrt(Z3) b instead would break this product identity and
    with it the exact cancellation of the quadratic terms.
    """
    if b < 0:
        raise DomainError("b must be >= 0")
    return b * state.e / state.e_ph


def _k_ratio(x: float, mass: float, cfg) -> float:
    return 2 * mass ** 4 * abs(f_eh(x, mass, cfg)) / x ** 4


@lru_cache(maxsize=32)
def bound_constant(mass: float = 1.0, rel_tol: float = 1e-11) -> float:
    """K = sup_x 2 m^4 |f_eh(x)| / x^4.

    The ratio is largest in the weak-field limit, where it equals
    2/(360 pi^2) exactly; a golden-section search over log x in (0, 1e8]
    confirms no interior maximum exceeds it.
    """
    cfg = QuadratureConfig(rel_tol=rel_tol)
    limit = 2.0 / (360.0 * math.pi ** 2)
    lo, hi = math.log(1e-3 * mass * mass), math.log(1e8)
    phi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - phi * (b - a), a + phi * (b - a)
    fc, fd = _k_ratio(math.exp(c), mass, cfg), _k_ratio(math.exp(d), mass, cfg)
    for _ in range(80):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = _k_ratio(math.exp(c), mass, cfg)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = _k_ratio(math.exp(d), mass, cfg)
        if b - a < 1e-6:
            break
    return max(limit, fc, fd)


@dataclass(frozen=True)
class EnergyDifference:
    difference: float
    exact_identity_value: float
    exponential_bound: float
    scale: float

    @property
    def identity_residual(self) -> float:
        return abs(self.difference - self.exact_identity_value)

    @property
    def within_bound(self) -> bool:
        return abs(self.difference) <= self.exponential_bound


def energy_difference(b: float, state: RenormState, cfg: QuadratureConfig | None = None) -> EnergyDifference:
    """Compare the bare PV energy with the renormalised physical energy.

    difference = [b^2/8pi + f_pv(e b)] - [b_ph^2/8pi + f_eh(e_ph b_ph)].
    The quadratic pieces cancel identically, leaving
    c1 f_eh(e b; m1) + c2 f_eh(e b; m2), which is bounded by
    K |c1| (e_ph b_ph/m)^4 exp(-6 pi (1 - Z3)/e_ph^2).
    ``scale`` is the magnitude of the larger bracket.
    """
    cfg = cfg or DEFAULT_CONFIG
    if b < 0:
        raise DomainError("b must be >= 0")
    sch = state.scheme
    if b == 0:
        return EnergyDifference(0.0, 0.0, 0.0, 0.0)
    x = state.e * b
    b_ph = bph_of(b, state)
    bare = b * b / (8 * math.pi) + f_pv(x, sch, cfg)
    phys = b_ph * b_ph / (8 * math.pi) + f_eh(state.e_ph * b_ph, sch.m0, cfg)
    identity = sch.c1 * f_eh(x, sch.m1, cfg) + sch.c2 * f_eh(x, sch.m2, cfg)
    k = bound_constant(sch.m0)
    bound = k * abs(sch.c1) * (state.e_ph * b_ph / sch.m0) ** 4 * math.exp(
        -6 * math.pi * (1 - state.z3) / state.e_ph ** 2)
    return EnergyDifference(bare - phys, identity, bound, max(abs(bare), abs(phys)))
