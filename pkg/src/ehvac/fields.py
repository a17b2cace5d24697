"""Magnetic fields on a periodic grid: potentials, scaling, Poincare gauge, LDA.

Grids live on a cube of side L = n * spacing with nodes at
``(j - n//2) * spacing`` along each axis, so the box is centred on the origin.
Localised profiles are placed well inside the box and the torus stands in for
R^3.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import DomainError, UnsupportedRegimeError
from .pvscheme import PvScheme, f_pv
from .quad import DEFAULT_CONFIG, QuadratureConfig, integrate

GRID_MAGIC = "# ehvac-grid v1"
MAX_GRID_POINTS = 512


@dataclass
class FieldGrid:
    """A 3-vector field sampled on an n^3 periodic grid, values shape (n, n, n, 3)."""

    n: int
    spacing: float
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.n < 2 or self.values.shape != (self.n, self.n, self.n, 3):
            raise DomainError(f"values must have shape ({self.n},)*3 + (3,), got {self.values.shape}")
        if not self.spacing > 0:
            raise DomainError("spacing must be > 0")

    @property
    def length(self) -> float:
        return self.n * self.spacing

    @property
    def cell_volume(self) -> float:
        return self.spacing ** 3

    def axis(self) -> np.ndarray:
        return (np.arange(self.n) - self.n // 2) * self.spacing

    def coords(self) -> np.ndarray:
        t = self.axis()
        return np.stack(np.meshgrid(t, t, t, indexing="ij"), axis=-1)

    def magnitude(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=-1)


# ---------------------------------------------------------------------------
# Spectral calculus
# ---------------------------------------------------------------------------

def _wavenumbers(n: int, spacing: float) -> np.ndarray:
    k = 2 * np.pi * np.fft.fftfreq(n, d=spacing)
    if n % 2 == 0:
        # the Nyquist mode has no odd derivative on a real grid
        k[n // 2] = 0.0
    return k


def _kgrid(n: int, spacing: float):
    k = _wavenumbers(n, spacing)
    return np.meshgrid(k, k, k, indexing="ij")


def _fft(v):
    return np.fft.fftn(v, axes=(0, 1, 2))


def _ifft(v):
    return np.fft.ifftn(v, axes=(0, 1, 2)).real


def spectral_curl(grid: FieldGrid) -> FieldGrid:
    kx, ky, kz = _kgrid(grid.n, grid.spacing)
    h = _fft(grid.values)
    c = np.empty_like(h)
    c[..., 0] = 1j * (ky * h[..., 2] - kz * h[..., 1])
    c[..., 1] = 1j * (kz * h[..., 0] - kx * h[..., 2])
    c[..., 2] = 1j * (kx * h[..., 1] - ky * h[..., 0])
    return FieldGrid(grid.n, grid.spacing, _ifft(c), dict(grid.metadata))


def spectral_divergence(grid: FieldGrid) -> np.ndarray:
    kx, ky, kz = _kgrid(grid.n, grid.spacing)
    h = _fft(grid.values)
    return _ifft(1j * (kx * h[..., 0] + ky * h[..., 1] + kz * h[..., 2])[..., None])[..., 0]


def divergence_residual(grid: FieldGrid) -> float:
    """max |div B| * spacing / max |B| (0 for a zero field)."""
    scale = float(np.abs(grid.values).max())
    if scale == 0:
        return 0.0
    return float(np.abs(spectral_divergence(grid)).max() * grid.spacing / scale)


def biot_savart(grid: FieldGrid, div_tol: float = 1e-8) -> FieldGrid:
    """Coulomb-gauge potential: A^(k) = i k x B^(k) / |k|^2 with A^(0) = 0."""
    scale = float(np.abs(grid.values).max())
    if scale == 0:
        return FieldGrid(grid.n, grid.spacing, np.zeros_like(grid.values), {"derived": "biot_savart"})
    mean = grid.values.reshape(-1, 3).mean(axis=0)
    if np.abs(mean).max() > 1e-8 * scale:
        raise UnsupportedRegimeError(f"B has nonzero mean {mean.tolist()}; no periodic potential exists")
    if divergence_residual(grid) > div_tol:
        raise DomainError("B is not divergence free on this grid")
    kx, ky, kz = _kgrid(grid.n, grid.spacing)
    k2 = kx ** 2 + ky ** 2 + kz ** 2
    k2[k2 == 0] = np.inf
    h = _fft(grid.values)
    a = np.empty_like(h)
    a[..., 0] = 1j * (ky * h[..., 2] - kz * h[..., 1]) / k2
    a[..., 1] = 1j * (kz * h[..., 0] - kx * h[..., 2]) / k2
    a[..., 2] = 1j * (kx * h[..., 1] - ky * h[..., 0]) / k2
    meta = dict(grid.metadata)
    meta["derived"] = "biot_savart"
    return FieldGrid(grid.n, grid.spacing, _ifft(a), meta)


def curl_residual(b: FieldGrid, a: FieldGrid) -> float:
    """max |curl A - B| / max |B|."""
    scale = float(np.abs(b.values).max())
    diff = float(np.abs(spectral_curl(a).values - b.values).max())
    return diff / scale if scale else diff


def random_bandlimited_field(n: int, length: float, k_max: int = 4, seed: int = 0) -> FieldGrid:
    """Random divergence-free, mean-zero field with modes |k_i| <= k_max (in units 2pi/L)."""
    rng = np.random.default_rng(seed)
    spacing = length / n
    raw = rng.standard_normal((n, n, n, 3))
    h = _fft(raw)
    idx = np.fft.fftfreq(n, d=1.0 / n)
    ix, iy, iz = np.meshgrid(idx, idx, idx, indexing="ij")
    keep = (np.abs(ix) <= k_max) & (np.abs(iy) <= k_max) & (np.abs(iz) <= k_max)
    keep[0, 0, 0] = False
    h *= keep[..., None]
    kx, ky, kz = _kgrid(n, spacing)
    k = np.stack([kx, ky, kz], axis=-1)
    k2 = np.sum(k * k, axis=-1)
    k2[k2 == 0] = 1.0
    h -= k * (np.sum(k * h, axis=-1) / k2)[..., None]
    vals = _ifft(h)
    vals /= np.abs(vals).max()
    return FieldGrid(n, spacing, vals, {"profile": "random_bandlimited", "k_max": k_max, "seed": seed})


# ---------------------------------------------------------------------------
# Analytic profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianProfile:
    """A = (b0/2) g(x) (-x2, x1, 0) with g = exp(-|x|^2 / 2 w^2).

    The field is localised, divergence free and carries no net flux.
    """

    b0: float = 1.0
    width: float = 1.0
    name: str = "gaussian"

    def _g(self, x):
        return np.exp(-np.sum(x * x, axis=-1) / (2 * self.width ** 2))

    def potential(self, x):
        x = np.asarray(x, dtype=float)
        phi = 0.5 * self.b0 * self._g(x)
        return np.stack([-phi * x[..., 1], phi * x[..., 0], np.zeros_like(phi)], axis=-1)

    def field(self, x):
        x = np.asarray(x, dtype=float)
        phi = 0.5 * self.b0 * self._g(x)
        w2 = self.width ** 2
        return np.stack([
            phi * x[..., 0] * x[..., 2] / w2,
            phi * x[..., 1] * x[..., 2] / w2,
            phi * (2 - (x[..., 0] ** 2 + x[..., 1] ** 2) / w2),
        ], axis=-1)

    def box_length(self) -> float:
        return 14.0 * self.width


@dataclass(frozen=True)
class FourierModeProfile:
    """B = b0 (0, 0, cos(2 pi x1 / L)) from A = b0 L/(2 pi) (0, sin(2 pi x1 / L), 0)."""

    b0: float = 1.0
    length: float = 2 * math.pi
    name: str = "fourier"

    def potential(self, x):
        x = np.asarray(x, dtype=float)
        k = 2 * math.pi / self.length
        z = np.zeros(x.shape[:-1])
        return np.stack([z, self.b0 / k * np.sin(k * x[..., 0]), z], axis=-1)

    def field(self, x):
        x = np.asarray(x, dtype=float)
        k = 2 * math.pi / self.length
        z = np.zeros(x.shape[:-1])
        return np.stack([z, z, self.b0 * np.cos(k * x[..., 0])], axis=-1)

    def box_length(self) -> float:
        return self.length


@dataclass(frozen=True)
class LinearProfile:
    """B(z) = B0 + M z with trace(M) = 0, A(z) = B0 x z / 2 + (M z) x z / 3.

    The potential is the Poincare-gauge one, valid because div B = trace M = 0.
    """

    b0: tuple = (0.0, 0.0, 1.0)
    m: tuple = ((0.0, 0.0, 0.0), (0.0, 0.0, 0.0), (0.0, 0.0, 0.0))
    name: str = "linear"

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.shape != (3, 3) or abs(np.trace(m)) > 1e-14 * max(1.0, np.abs(m).max()):
            raise DomainError("M must be a traceless 3x3 matrix")

    def field(self, x):
        x = np.asarray(x, dtype=float)
        return np.asarray(self.b0) + x @ np.asarray(self.m).T

    def potential(self, x):
        x = np.asarray(x, dtype=float)
        b0 = np.broadcast_to(np.asarray(self.b0, dtype=float), x.shape)
        mx = x @ np.asarray(self.m).T
        return np.cross(b0, x) / 2 + np.cross(mx, x) / 3


PROFILES = {"gaussian": GaussianProfile, "fourier": FourierModeProfile}


def sample_profile(profile, n: int, length: float | None = None) -> FieldGrid:
    """Sample ``profile.field`` at the nodes of an n^3 grid."""
    if n > MAX_GRID_POINTS:
        raise DomainError(f"n = {n} exceeds the grid limit {MAX_GRID_POINTS}")
    length = length or profile.box_length()
    spacing = length / n
    t = (np.arange(n) - n // 2) * spacing
    pts = np.stack(np.meshgrid(t, t, t, indexing="ij"), axis=-1)
    meta = {"profile": profile.name}
    meta.update({k: v for k, v in vars(profile).items() if k != "name" and np.isscalar(v)})
    return FieldGrid(n, spacing, profile.field(pts), meta)


# ---------------------------------------------------------------------------
# Scaling and the Poincare gauge
# ---------------------------------------------------------------------------

def scale_potential(a: FieldGrid, eps: float, n_out: int | None = None) -> FieldGrid:
    """A_eps(x) = A(eps x) / eps on the stretched grid.

    With ``n_out == n`` the node values are exact: spacing becomes
    spacing/eps and values A/eps.  A larger ``n_out`` refines the stretched
    grid by spectral (zero-padding) interpolation.
    """
    if not 0 < eps <= 1:
        raise DomainError("eps must lie in (0, 1]")
    n_out = n_out or a.n
    if n_out < a.n:
        raise DomainError("n_out must be >= n")
    if n_out > MAX_GRID_POINTS or n_out ** 3 * 3 > 2 ** 31:
        raise DomainError(f"n_out = {n_out} exceeds the grid limit {MAX_GRID_POINTS}")
    meta = dict(a.metadata)
    meta["eps"] = eps
    vals = a.values / eps
    if n_out != a.n:
        vals = _fourier_resample(vals, n_out)
    return FieldGrid(n_out, a.length / eps / n_out, vals, meta)


def _fourier_resample(vals: np.ndarray, n_out: int) -> np.ndarray:
    n = vals.shape[0]
    h = np.fft.fftshift(_fft(vals), axes=(0, 1, 2))
    if n % 2 == 0:
        # split the Nyquist plane symmetrically so the result stays real
        h = np.pad(h, [(0, 1)] * 3 + [(0, 0)], mode="constant")
        for ax in range(3):
            sl_lo = [slice(None)] * 4
            sl_hi = [slice(None)] * 4
            sl_lo[ax], sl_hi[ax] = 0, n
            h[tuple(sl_lo)] *= 0.5
            h[tuple(sl_hi)] = h[tuple(sl_lo)]
        m = n + 1
    else:
        m = n
    big = np.zeros((n_out, n_out, n_out, 3), dtype=complex)
    off = n_out // 2 - m // 2
    big[off:off + m, off:off + m, off:off + m] = h
    out = np.fft.ifftn(np.fft.ifftshift(big, axes=(0, 1, 2)), axes=(0, 1, 2)).real
    return out * (n_out / n) ** 3


def poincare_remainder(b_field: Callable, eps: float, y, x, cfg: QuadratureConfig | None = None) -> np.ndarray:
    """R_{eps,y}(x) = x cross int_0^1 [B(y) - B(y + t eps x)] / eps * t dt."""
    cfg = cfg or DEFAULT_CONFIG
    if not eps > 0:
        raise DomainError("eps must be > 0")
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    by = np.asarray(b_field(y), dtype=float)

    def f(t):
        pts = y[None, :] + eps * t[:, None] * x[None, :]
        return (by[None, :] - b_field(pts)) / eps * t[:, None]

    res = integrate(f, 0.0, 1.0, rel_tol=cfg.rel_tol, abs_tol=max(cfg.abs_tol, 1e-300),
                    max_subdivisions=cfg.max_subdivisions, initial=2)
    return np.cross(x, np.asarray(res.value))


def poincare_gauge_check(a_field: Callable, b_field: Callable, y, x,
                         cfg: QuadratureConfig | None = None, h: float = 1e-3) -> np.ndarray:
    """A(y+x) - [grad_x (x . int_0^1 A(y+tx) dt) - x cross int_0^1 B(y+tx) t dt].

    The gradient uses a fourth-order central difference of the scalar
    x . int A; ``b_field`` must be curl A.
    """
    cfg = cfg or DEFAULT_CONFIG
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)

    def line_avg(fn, xx, weight_t):
        def f(t):
            v = fn(y[None, :] + t[:, None] * xx[None, :])
            return v * t[:, None] if weight_t else v
        return np.asarray(integrate(f, 0.0, 1.0, rel_tol=cfg.rel_tol, abs_tol=1e-300, initial=2).value)

    def scalar(xx):
        return float(xx @ line_avg(a_field, xx, False))

    grad = np.empty(3)
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        grad[i] = (-scalar(x + 2 * e) + 8 * scalar(x + e) - 8 * scalar(x - e) + scalar(x - 2 * e)) / (12 * h)
    second = -np.cross(x, line_avg(b_field, x, True))
    return np.asarray(a_field(y + x), dtype=float) - (grad + second)


# ---------------------------------------------------------------------------
# Local density approximation
# ---------------------------------------------------------------------------

def lda_energy(grid: FieldGrid, e: float, scheme: PvScheme, cfg: QuadratureConfig | None = None,
               chunk: int = 512) -> float:
    """sum over nodes of f_pv(e |B(node)|) * spacing^3."""
    cfg = cfg or DEFAULT_CONFIG
    if e < 0:
        raise DomainError("charge must be >= 0")
    x = e * grid.magnitude().ravel()
    uniq, inv = np.unique(x, return_inverse=True)
    vals = np.zeros_like(uniq)
    live = np.flatnonzero(uniq > 0)
    for start in range(0, len(live), chunk):
        sel = live[start:start + chunk]
        vals[sel] = f_pv(uniq[sel], scheme, cfg)
    # fixed ascending-node summation order
    return float(np.sum(vals[inv]) * grid.cell_volume)


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------

def write_grid(grid: FieldGrid, path) -> None:
    """Text container: magic line, one JSON header line, then n^3 rows 'bx by bz'."""
    header = {"n": grid.n, "spacing": grid.spacing, "profile": grid.metadata.get("profile", "custom"),
              "metadata": grid.metadata}
    rows = grid.values.reshape(-1, 3)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(GRID_MAGIC + "\n")
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for r in rows.tolist():
            fh.write(f"{r[0]!r} {r[1]!r} {r[2]!r}\n")


def read_grid(path) -> FieldGrid:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DomainError(f"cannot read grid file {path}: {exc}") from exc
    if not lines or lines[0].strip() != GRID_MAGIC:
        raise DomainError(f"{path} is not an ehvac grid file (missing '{GRID_MAGIC}')")
    try:
        header = json.loads(lines[1])
        n = int(header["n"])
        spacing = float(header["spacing"])
    except (IndexError, KeyError, ValueError) as exc:
        raise DomainError(f"{path}: malformed header") from exc
    body = [ln for ln in lines[2:] if ln.strip()]
    if len(body) != n ** 3:
        raise DomainError(f"{path}: expected {n ** 3} rows, found {len(body)}")
    try:
        vals = np.array([[float(v) for v in ln.split()] for ln in body]).reshape(n, n, n, 3)
    except ValueError as exc:
        raise DomainError(f"{path}: malformed data row ({exc})") from exc
    meta = dict(header.get("metadata", {}))
    meta.setdefault("profile", header.get("profile", "custom"))
    return FieldGrid(n, spacing, vals, meta)


def magnitude_histogram(grid: FieldGrid, bins: int = 32) -> list[tuple[float, float, int]]:
    counts, edges = np.histogram(grid.magnitude().ravel(), bins=bins)
    return [(float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(bins)]


def write_histogram_csv(grid: FieldGrid, path, bins: int = 32) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("bin_lo,bin_hi,count\n")
        for lo, hi, c in magnitude_histogram(grid, bins):
            fh.write(f"{lo!r},{hi!r},{c}\n")
