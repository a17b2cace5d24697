"""Pauli-Villars coefficient algebra and the regulated vacuum energy f_pv."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .quad import DEFAULT_CONFIG, QuadratureConfig, coth_reduced, expm1_tail, proper_time_integrate


@dataclass(frozen=True)
class PvScheme:
    """Three masses m0 < m1 < m2 with coefficients fixed by the two sum rules.

    Use :func:`make_scheme` rather than building this by hand.
    """

    m0: float
    m1: float
    m2: float
    c1: float = field(init=False)
    c2: float = field(init=False)
    log_lambda: float = field(init=False)

    def __post_init__(self):
        m0, m1, m2 = float(self.m0), float(self.m1), float(self.m2)
        if not (0 < m0 < m1 < m2) or not all(map(math.isfinite, (m0, m1, m2))):
            raise DomainError(f"masses must satisfy 0 < m0 < m1 < m2, got {(m0, m1, m2)}")
        d = m2 * m2 - m1 * m1
        c1 = -(m2 * m2 - m0 * m0) / d
        c2 = (m1 * m1 - m0 * m0) / d
        object.__setattr__(self, "c1", c1)
        object.__setattr__(self, "c2", c2)
        log_l = -(math.log(m0) + c1 * math.log(m1) + c2 * math.log(m2))
        object.__setattr__(self, "log_lambda", log_l)

    @property
    def c0(self) -> float:
        return 1.0

    @property
    def masses(self) -> np.ndarray:
        return np.array([self.m0, self.m1, self.m2])

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([1.0, self.c1, self.c2])

    def sum_rules(self) -> tuple[float, float]:
        c, m = self.coefficients, self.masses
        return float(c.sum()), float((c * m * m).sum())

    def scaled(self, lam: float) -> "PvScheme":
        return PvScheme(self.m0 * lam, self.m1 * lam, self.m2 * lam)


def make_scheme(m0: float, m1: float, m2: float) -> PvScheme:
    return PvScheme(m0, m1, m2)


def parse_masses(text: str) -> PvScheme:
    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) != 3:
        raise DomainError(f"expected three comma-separated masses, got {text!r}")
    return make_scheme(*(float(p) for p in parts))


def pv_weight(s, scheme: PvScheme):
    """w(s) = sum_j c_j exp(-s m_j^2), evaluated without cancellation at small s.

    Both sum rules let us write w = sum_j c_j phi(s m_j^2) with
    phi(x) = exp(-x) - 1 + x, which keeps full relative accuracy as s -> 0
    where w ~ s^2.
    """
    arr = np.asarray(s, dtype=float)
    if np.any(arr < 0):
        raise DomainError("pv_weight needs s >= 0")
    c, m2 = scheme.coefficients, scheme.masses ** 2
    out = np.zeros_like(arr)
    small = arr * m2[0] < 1.0
    xs = arr[small]
    if xs.size:
        out[small] = sum(cj * expm1_tail(xs * mj) for cj, mj in zip(c, m2))
    xl = arr[~small]
    if xl.size:
        out[~small] = sum(cj * np.exp(-xl * mj) for cj, mj in zip(c, m2))
    return float(out) if arr.ndim == 0 else out


def pv_resolvent_weight(x, scheme: PvScheme):
    """sum_j c_j / (x + m_j^2), through the cancellation-free identity

        sum_j c_j (m_j^2 - m0^2)^2 / ((x + m_j^2)(x + m0^2)^2),

    which is manifestly nonnegative and decays like x^-3.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise DomainError("pv_resolvent_weight needs x >= 0")
    c, m2 = scheme.coefficients, scheme.masses ** 2
    out = sum(
        cj * (mj - m2[0]) ** 2 / ((arr + mj) * (arr + m2[0]) ** 2)
        for cj, mj in zip(c[1:], m2[1:])
    )
    return float(out) if arr.ndim == 0 else out


def quadratic_coefficient(scheme: PvScheme) -> float:
    """Weak-field coefficient of f_pv: (1/24 pi^2) int w(s) ds/s = log(Lambda)/(12 pi^2).

    The Frullani integral gives int w ds/s = 2 log(Lambda).  A display of this
    relation with log(Lambda)/(24 pi^2) is off by a factor 2; the weak-field
    limit of f_pv pins the value used here.
    """
    return scheme.log_lambda / (12.0 * math.pi ** 2)


def strong_field_slope(scheme: PvScheme) -> float:
    """lim f_pv(x)/x as x -> infinity: (1/8 pi^2) sum_j c_j m_j^2 log m_j^2."""
    c, m2 = scheme.coefficients, scheme.masses ** 2
    return float((c * m2 * np.log(m2)).sum() / (8 * math.pi ** 2))


def f_pv(x, scheme: PvScheme, cfg: QuadratureConfig | None = None):
    """PV-regulated Euler-Heisenberg energy (1/8pi^2) int w(s)(sx coth sx - 1) s^-3 ds.

    ``x`` is e|B| in units of m^2 and may be an array; arrays share one
    adaptive refinement.
    """
    cfg = cfg or DEFAULT_CONFIG
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(~np.isfinite(arr)):
        raise DomainError("f_pv needs finite x >= 0")
    flat = np.atleast_1d(arr).ravel()
    out = np.zeros_like(flat)
    live = flat > 0
    if np.any(live):
        xs = np.unique(flat[live])

        def g(s):
            return coth_reduced(np.outer(s, xs)) if len(xs) > 1 else coth_reduced(s * xs[0])

        vals = proper_time_integrate(
            g, 3.0, scheme, cfg, prefactor=1.0 / (8 * math.pi ** 2),
            small_s_order=1.0, scale=float(xs.max()),
        )
        vals = np.atleast_1d(vals)
        out[live] = vals[np.searchsorted(xs, flat[live])]
    out = out.reshape(np.shape(arr))
    return float(out) if arr.ndim == 0 else out


def relation_terms(x: float, scheme: PvScheme, cfg: QuadratureConfig | None = None) -> dict:
    """Pieces of f_pv(x) = sum_j c_j f_eh(x; m_j) + q x^2."""
    from .ehdensity import f_eh

    eh = [cj * f_eh(x, mj, cfg) for cj, mj in zip(scheme.coefficients, scheme.masses)]
    quad = quadratic_coefficient(scheme) * x * x
    return {"f_pv": f_pv(x, scheme, cfg), "eh_terms": eh, "quadratic": quad}


def relation_residual(x: float, scheme: PvScheme, cfg: QuadratureConfig | None = None,
                      *, relative: bool = False) -> float:
    """f_pv(x) - [f_eh(x; m0) + c1 f_eh(x; m1) + c2 f_eh(x; m2) + q x^2].

    Here c_j f_eh(x; m_j) equals c_j (m_j^4/m^4) f_eh(m^2 x/m_j^2) written in
    units of the physical mass, and q = log(Lambda)/(12 pi^2) (see
    :func:`quadratic_coefficient`).  With ``relative=True`` the residual is
    divided by the largest term magnitude.
    """
    if x < 0:
        raise DomainError("relation_residual needs x >= 0")
    if x == 0:
        return 0.0
    t = relation_terms(x, scheme, cfg)
    res = t["f_pv"] - (sum(t["eh_terms"]) + t["quadratic"])
    if relative:
        scale = max(abs(t["f_pv"]), abs(t["quadratic"]), *(abs(v) for v in t["eh_terms"]))
        return res / scale
    return res
