"""Constant magnetic field: Landau levels, Pauli heat kernel and resolvent.

The field is B = b e3 with gauge A = B x x / 2 and the Pauli operator
P = (-i grad - A)^2 - sigma.B acting on 2-spinors.  All outputs depend on
the field only through |B|, so a scalar ``b`` is taken throughout; any other
direction is reached by a rotation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .pvscheme import PvScheme, pv_weight
from .quad import DEFAULT_CONFIG, QuadratureConfig, coth_reduced, integrate, proper_time_integrate


# ---------------------------------------------------------------------------
# Landau levels and the heat density
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LandauSpectrum:
    b: float
    n_max: int
    levels: tuple[tuple[int, int, float], ...] = field(init=False)

    def __post_init__(self):
        if self.b < 0 or self.n_max < 0:
            raise DomainError("need b >= 0 and n_max >= 0")
        lv = tuple((n, nu, (2 * n + 1 + nu) * self.b)
                   for n in range(self.n_max + 1) for nu in (-1, 1))
        object.__setattr__(self, "levels", lv)

    @property
    def degeneracy_density(self) -> float:
        return self.b / (2 * math.pi)

    def energies(self) -> np.ndarray:
        return np.array([e for _, _, e in self.levels])


def landau_n_max(s: float, b: float, tail: float = 1e-16, rel_tol: float | None = None) -> int:
    """Smallest n_max with exp(-2 n_max s b) < tail.

    With ``rel_tol`` the truncation is instead tied to the quantity that
    survives the cancellation: the omitted tail of the level sum must stay
    below rel_tol/10 times s b coth(s b) - 1.
    """
    x = s * b
    if x <= 0:
        return 0
    n = int(math.ceil(-math.log(tail) / (2 * x))) + 1
    if rel_tol is not None:
        target = 0.1 * rel_tol * float(coth_reduced(x)) * (-math.expm1(-2 * x)) / 2
        n = max(n, int(math.ceil(-math.log(target) / (2 * x))))
    return n


def landau_sum(s: float, b: float, n_max: int) -> float:
    """sum_{nu=+-1} sum_{n<=n_max} exp(-(2n+1+nu) s b), in extended precision."""
    n = np.arange(n_max, -1, -1, dtype=np.longdouble)
    x = np.longdouble(s) * np.longdouble(b)
    e = np.exp(-2 * n * x)
    return (e.sum() * (1 + np.exp(-2 * x)))


@dataclass(frozen=True)
class HeatDensity:
    landau_route: float
    closed_form: float
    n_max: int
    tail_bound: float

    @property
    def relative_gap(self) -> float:
        if self.closed_form == 0:
            return abs(self.landau_route)
        return abs(self.landau_route - self.closed_form) / abs(self.closed_form)


def heat_density_closed(s, b):
    """(s b coth(s b) - 1) / (4 pi^(3/2) s^(3/2))."""
    s = np.asarray(s, dtype=float)
    return coth_reduced(s * b) / (4 * math.pi ** 1.5 * s ** 1.5)


def landau_heat_density(s: float, b: float, n_max: int | None = None,
                        tol: float = 1e-12) -> HeatDensity:
    """Relative heat trace per unit volume, by Landau sum and by closed form.

    The Landau route is (b/2pi)(4 pi s)^(-1/2) S - 2 (4 pi s)^(-3/2) where S is
    the level sum; written as prefactor * (S - 1/(s b)) and evaluated in
    extended precision because S and 1/(sb) nearly cancel when sb is small.
    """
    if not s > 0 or b < 0:
        raise DomainError("need s > 0 and b >= 0")
    closed = float(heat_density_closed(s, b))
    if b == 0:
        return HeatDensity(0.0, 0.0, 0, 0.0)
    if n_max is None:
        n_max = landau_n_max(s, b, rel_tol=tol)
    x = s * b
    tail = math.exp(-2 * (n_max + 1) * x) * 2 / (-math.expm1(-2 * x))
    pre = np.longdouble(b) / (2 * np.pi) / np.sqrt(4 * np.pi * np.longdouble(s))
    S = landau_sum(s, b, n_max)
    val = pre * (S - 1 / (np.longdouble(s) * np.longdouble(b)))
    if tail * float(pre) > tol * abs(closed):
        warnings.warn(f"Landau sum truncated at n_max={n_max}: tail {tail:.3e} exceeds tolerance",
                      RuntimeWarning, stacklevel=2)
    return HeatDensity(float(val), closed, n_max, float(tail * pre))


# ---------------------------------------------------------------------------
# Heat kernel
# ---------------------------------------------------------------------------

def _spin_factors(s, b):
    """(b e^{bs}/sinh bs, b e^{-bs}/sinh bs, b coth bs) in overflow-free form."""
    s = np.asarray(s, dtype=float)
    if b == 0:
        inv = 1.0 / s
        return inv, inv, inv
    q = np.exp(-2 * b * s)
    one_minus_q = -np.expm1(-2 * b * s)
    up = 2 * b / one_minus_q
    down = 2 * b * q / one_minus_q
    bcoth = b * (1 + q) / one_minus_q
    return up, down, bcoth


def pauli_heat_kernel(s: float, b: float, x, y) -> np.ndarray:
    """2x2 heat kernel exp(-s P)(x, y) for B = b e3, gauge A = B x x / 2.

    ``x`` and ``y`` may carry leading batch dimensions, shape (..., 3); the
    result has shape (..., 2, 2).
    """
    if not s > 0 or b < 0:
        raise DomainError("need s > 0 and b >= 0")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = x - y
    rp2 = r[..., 0] ** 2 + r[..., 1] ** 2
    up, down, bcoth = _spin_factors(s, b)
    cross = x[..., 0] * y[..., 1] - x[..., 1] * y[..., 0]
    base = np.exp(-0.25 * bcoth * rp2 - r[..., 2] ** 2 / (4 * s)) / (8 * math.pi ** 1.5 * math.sqrt(s))
    phase = np.exp(-0.5j * b * cross)
    out = np.zeros(r.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = base * up * phase
    out[..., 1, 1] = base * down * phase
    return out


@dataclass(frozen=True)
class GaussianLocalizer:
    """G(x) = (pi rho^2/2)^(-3/4) exp(-|x|^2/rho^2), normalised so int G^2 = 1."""

    rho: float

    def __post_init__(self):
        if not self.rho > 0:
            raise DomainError("rho must be > 0")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return (math.pi * self.rho ** 2 / 2) ** -0.75 * np.exp(-np.sum(x * x, axis=-1) / self.rho ** 2)

    def norm_squared(self, rel_tol: float = 1e-13) -> float:
        """int G^2 over R^3, by quadrature of the separable 1-D factor."""
        c = (math.pi * self.rho ** 2 / 2) ** -0.25
        half = 8 * self.rho
        one_d = integrate(lambda t: (c * np.exp(-t * t / self.rho ** 2)) ** 2, -half, half,
                          rel_tol=rel_tol).value
        return one_d ** 3


def localized_heat_trace(s: float, b: float, loc: GaussianLocalizer, *, route: str = "quadrature",
                         n_nodes: int = 56) -> float:
    """tr G exp(-sP) G = int G(x)^2 tr_2 K(s, x, x) dx.

    ``route="closed"`` returns s b coth(s b)/(4 pi^(3/2) s^(3/2)) directly;
    ``route="quadrature"`` integrates the localizer against the kernel
    diagonal, which makes the rho independence a numerical statement.
    """
    if not s > 0 or b < 0:
        raise DomainError("need s > 0 and b >= 0")
    if route == "closed":
        return float((coth_reduced(s * b) + 1) / (4 * math.pi ** 1.5 * s ** 1.5))
    if route != "quadrature":
        raise DomainError(f"unknown route {route!r}")
    # tensor Gauss-Legendre over [-6 rho, 6 rho]^3; G^2 < 1e-31 outside
    t, w = np.polynomial.legendre.leggauss(n_nodes)
    t, w = 6 * loc.rho * t, 6 * loc.rho * w
    pts = np.stack(np.meshgrid(t, t, t, indexing="ij"), axis=-1).reshape(-1, 3)
    wts = (w[:, None, None] * w[None, :, None] * w[None, None, :]).ravel()
    diag = np.trace(pauli_heat_kernel(s, b, pts, pts), axis1=-2, axis2=-1).real
    return float(np.sum(wts * loc(pts) ** 2 * diag))


# ---------------------------------------------------------------------------
# Resolvent kernel and the pointwise bounds
# ---------------------------------------------------------------------------

def _resolvent_integrals(mu: float, b: float, r: np.ndarray, cfg: QuadratureConfig):
    """Proper-time integrals per pair and spin.

    Returns array (N, 2, 3): for spin up/down, int e^{-mu^2 s} F ds with F the
    scalar kernel, the same with an extra b coth(bs), and with 1/(2s).
    """
    r = np.atleast_2d(r)
    n = len(r)
    rp2 = r[:, 0] ** 2 + r[:, 1] ** 2
    r32 = r[:, 2] ** 2
    rmin2 = float((rp2 + r32).min())

    def g(s):
        up, down, bcoth = _spin_factors(s, b)
        s_col = s[:, None]
        bc = np.broadcast_to(bcoth, s.shape)[:, None]
        base = np.exp(-0.25 * bc * rp2[None, :] - r32[None, :] / (4 * s_col)) / (8 * math.pi ** 1.5)
        out = np.empty((len(s), n, 2, 3))
        for k, spin in enumerate((up, down)):
            f = base * np.broadcast_to(spin, s.shape)[:, None]
            out[:, :, k, 0] = f
            out[:, :, k, 1] = f * bc
            out[:, :, k, 2] = f / (2 * s_col)
        return out.reshape(len(s), -1)

    vals = proper_time_integrate(g, 0.5, float(mu), cfg, small_s_order=50.0, scale=1.0 / rmin2)
    return np.asarray(vals).reshape(n, 2, 3)


def _as_pairs(x, y):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    r = x - y
    if np.any(np.linalg.norm(r, axis=1) == 0):
        raise DomainError("resolvent kernel is singular at coincident points")
    return x, y, r


def pauli_resolvent_kernel(mu: float, b: float, x, y, cfg: QuadratureConfig | None = None) -> np.ndarray:
    """(P + mu^2)^{-1}(x, y) = int_0^inf e^{-s mu^2} exp(-sP)(x, y) ds as a 2x2 matrix.

    Batched over pairs when ``x`` and ``y`` have shape (N, 3).
    """
    cfg = cfg or DEFAULT_CONFIG
    if not mu > 0 or b < 0:
        raise DomainError("need mu > 0 and b >= 0")
    single = np.ndim(x) == 1
    x, y, r = _as_pairs(x, y)
    ints = _resolvent_integrals(mu, b, r, cfg)
    phase = np.exp(-0.5j * b * (x[:, 0] * y[:, 1] - x[:, 1] * y[:, 0]))
    out = np.zeros((len(r), 2, 2), dtype=complex)
    out[:, 0, 0] = phase * ints[:, 0, 0]
    out[:, 1, 1] = phase * ints[:, 1, 0]
    return out[0] if single else out


def pauli_resolvent_gradient(mu: float, b: float, x, y, cfg: QuadratureConfig | None = None) -> np.ndarray:
    """Covariant derivatives (-i d_j - A_j) in x of the resolvent kernel.

    Returns shape (N, 3, 2, 2).  With r = x - y and F the heat kernel:
    j=1: (b/2)(r2 + i coth(bs) r1) F, j=2: (b/2)(-r1 + i coth(bs) r2) F,
    j=3: i r3/(2s) F, each integrated against e^{-s mu^2}.
    """
    cfg = cfg or DEFAULT_CONFIG
    single = np.ndim(x) == 1
    x, y, r = _as_pairs(x, y)
    ints = _resolvent_integrals(mu, b, r, cfg)
    phase = np.exp(-0.5j * b * (x[:, 0] * y[:, 1] - x[:, 1] * y[:, 0]))
    out = np.zeros((len(r), 3, 2, 2), dtype=complex)
    for k in range(2):
        i0, ic, i3 = ints[:, k, 0], ints[:, k, 1], ints[:, k, 2]
        out[:, 0, k, k] = phase * (0.5 * b * r[:, 1] * i0 + 0.5j * r[:, 0] * ic)
        out[:, 1, k, k] = phase * (-0.5 * b * r[:, 0] * i0 + 0.5j * r[:, 1] * ic)
        out[:, 2, k, k] = phase * 1j * r[:, 2] * i3
    return out[0] if single else out


def resolvent_bound(mu: float, b: float, r) -> np.ndarray:
    """(1/4pi)(1/|r| + 2|b|/mu) e^{-mu |r|}."""
    rn = np.linalg.norm(np.atleast_2d(r), axis=1)
    return (1 / rn + 2 * b / mu) * np.exp(-mu * rn) / (4 * math.pi)


def gradient_bound(mu: float, b: float, r) -> np.ndarray:
    """(|b|/2pi + 2/(pi r^2) + 2mu/(pi r) + 5 b^2 |r_perp|/(4 pi mu)) e^{-mu r}."""
    r = np.atleast_2d(r)
    rn = np.linalg.norm(r, axis=1)
    rp = np.hypot(r[:, 0], r[:, 1])
    return (b / (2 * math.pi) + 2 / (math.pi * rn ** 2) + 2 * mu / (math.pi * rn)
            + 5 * b * b * rp / (4 * math.pi * mu)) * np.exp(-mu * rn)


def _sup_norm(m: np.ndarray) -> np.ndarray:
    # operator norm of 2x2 matrices, batched on leading axes
    return np.linalg.norm(m, ord=2, axis=(-2, -1))


@dataclass
class KernelBoundReport:
    mu: float
    b: float
    kernel_norm: np.ndarray
    kernel_bound: np.ndarray
    gradient_norm: np.ndarray
    gradient_bound: np.ndarray
    samples: np.ndarray

    @property
    def kernel_margin(self) -> np.ndarray:
        return (self.kernel_bound - self.kernel_norm) / self.kernel_bound

    @property
    def gradient_margin(self) -> np.ndarray:
        return (self.gradient_bound - self.gradient_norm) / self.gradient_bound

    @property
    def passed(self) -> bool:
        return bool(np.all(self.kernel_margin >= 0) and np.all(self.gradient_margin >= 0))

    def violations(self) -> list[dict]:
        bad = np.flatnonzero((self.kernel_margin < 0) | (self.gradient_margin < 0))
        return [
            {
                "x": self.samples[i, 0].tolist(), "y": self.samples[i, 1].tolist(),
                "kernel": float(self.kernel_norm[i]), "kernel_bound": float(self.kernel_bound[i]),
                "gradient": float(self.gradient_norm[i]), "gradient_bound": float(self.gradient_bound[i]),
            }
            for i in bad
        ]


def check_kernel_bounds(mu: float, b: float, samples, cfg: QuadratureConfig | None = None,
                        batch: int = 250) -> KernelBoundReport:
    """Evaluate both pointwise resolvent bounds on sample pairs.

    ``samples`` has shape (N, 2, 3) holding (x, y) pairs.  The gradient norm is
    the largest sup norm over the three directions j.
    """
    cfg = cfg or QuadratureConfig(rel_tol=1e-9)
    samples = np.asarray(samples, dtype=float)
    kn, gn = [], []
    for start in range(0, len(samples), batch):
        chunk = samples[start:start + batch]
        x, y = chunk[:, 0], chunk[:, 1]
        x, y, r = _as_pairs(x, y)
        ints = _resolvent_integrals(mu, b, r, cfg)
        kn.append(np.abs(ints[:, :, 0]).max(axis=1))
        # diagonal matrices: the sup norm is the larger entry modulus
        d = np.empty((len(r), 3, 2))
        for k in range(2):
            i0, ic, i3 = ints[:, k, 0], ints[:, k, 1], ints[:, k, 2]
            d[:, 0, k] = np.hypot(0.5 * b * r[:, 1] * i0, 0.5 * r[:, 0] * ic)
            d[:, 1, k] = np.hypot(0.5 * b * r[:, 0] * i0, 0.5 * r[:, 1] * ic)
            d[:, 2, k] = np.abs(r[:, 2] * i3)
        gn.append(d.max(axis=(1, 2)))
    r_all = samples[:, 0] - samples[:, 1]
    return KernelBoundReport(
        float(mu), float(b), np.concatenate(kn), resolvent_bound(mu, b, r_all),
        np.concatenate(gn), gradient_bound(mu, b, r_all), samples,
    )


# ---------------------------------------------------------------------------
# Frequency-resolved PV energy
# ---------------------------------------------------------------------------

def f_pv_omega(omega, b: float, scheme: PvScheme, cfg: QuadratureConfig | None = None):
    """(1/4 pi^(3/2)) int e^{-s omega^2} w(s)(s b coth(s b) - 1) s^(-3/2) ds.

    Vectorised over ``omega`` with a shared refinement.
    """
    cfg = cfg or DEFAULT_CONFIG
    if b < 0:
        raise DomainError("b must be >= 0")
    om = np.asarray(omega, dtype=float)
    flat = np.atleast_1d(om).ravel()
    if b == 0:
        out = np.zeros_like(flat)
    else:
        w2 = flat * flat

        def g(s):
            return coth_reduced(s * b)[:, None] * np.exp(-np.outer(s, w2))

        vals = proper_time_integrate(g, 1.5, scheme, cfg, prefactor=1 / (4 * math.pi ** 1.5),
                                     small_s_order=2.5, scale=max(b, float(w2.max())))
        out = np.atleast_1d(vals)
    out = out.reshape(om.shape)
    return float(out) if om.ndim == 0 else out


def f_pv_via_omega(b: float, scheme: PvScheme, cfg: QuadratureConfig | None = None,
                   omega_range: tuple[float, float] = (1e-6, 1e6)) -> float:
    """f_pv(b) = (2/pi) int_0^inf f_pv_omega(omega) omega^2 d omega.

    The outer integral runs over log omega; each batch of outer nodes is
    evaluated by one vectorised inner proper-time integral.  The tails use
    f_pv_omega ~ const as omega -> 0 and ~ omega^-5 as omega -> infinity.
    """
    cfg = cfg or DEFAULT_CONFIG
    if b == 0:
        return 0.0
    lo, hi = omega_range

    def outer(v):
        om = np.exp(v)
        return f_pv_omega(om, b, scheme, cfg) * om ** 3

    res = integrate(outer, math.log(lo), math.log(hi), rel_tol=10 * cfg.rel_tol,
                    max_subdivisions=cfg.max_subdivisions, initial=12)
    edge = f_pv_omega(np.array([lo, hi]), b, scheme, cfg)
    tails = edge[0] * lo ** 3 / 3 + edge[1] * hi ** 3 / 2
    return 2 / math.pi * (res.value + tails)
