"""Fourier machinery on the flat torus D = [0, 2pi]^2.

Fields are stored by their coefficients in the orthonormal basis
``e_k(x) = exp(i k.x) / (2 pi)``, so ``coeff(k) = <f, e_k>``.  A field of
cutoff ``K`` holds the full symmetric block ``|k1|, |k2| <= K`` in an array of
shape ``(..., 2K+1, 2K+1)`` indexed by ``[k1 + K, k2 + K]``; leading axes are
batch axes.  Grid values live at ``x_ab = (2 pi a / n, 2 pi b / n)`` with
axis 0 along ``x1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft

TWO_PI = 2.0 * np.pi
HERMITIAN_RTOL = 1e-10


class AliasingError(ValueError):
    """Grid too coarse to represent the requested modes."""


@lru_cache(maxsize=64)
def wavenumbers(K: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer lattice ``(k1, k2)`` arrays of shape ``(2K+1, 2K+1)``."""
    k = np.arange(-K, K + 1)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    k1.setflags(write=False)
    k2.setflags(write=False)
    return k1, k2


@lru_cache(maxsize=64)
def ksq(K: int) -> np.ndarray:
    k1, k2 = wavenumbers(K)
    out = (k1 * k1 + k2 * k2).astype(float)
    out.setflags(write=False)
    return out


def cutoff_of(coeffs: np.ndarray) -> int:
    m = coeffs.shape[-1]
    if coeffs.shape[-2] != m or m % 2 == 0:
        raise ValueError(f"coefficient block must be (2K+1, 2K+1), got {coeffs.shape[-2:]}")
    return (m - 1) // 2


def conj_flip(coeffs: np.ndarray) -> np.ndarray:
    """``conj(coeff(-k))`` laid out at ``k``."""
    return np.conj(coeffs[..., ::-1, ::-1])


def hermitian_defect(coeffs: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(coeffs), initial=0.0)), 1e-300)
    return float(np.max(np.abs(coeffs - conj_flip(coeffs)), initial=0.0)) / scale


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Zero-mean real scalar field given by Hermitian-symmetric coefficients."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim != 2:
            raise ValueError("SpectralField holds a single field; use raw arrays for batches")
        K = cutoff_of(c)
        if c[K, K] != 0:
            raise ValueError("coefficient at k=(0,0) must be exactly 0 (zero spatial mean)")
        if hermitian_defect(c) > HERMITIAN_RTOL:
            raise ValueError("coefficients violate Hermitian symmetry coeff(-k) = conj(coeff(k))")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def cutoff(self) -> int:
        return cutoff_of(self.coeffs)

    @classmethod
    def zeros(cls, K: int) -> "SpectralField":
        return cls(np.zeros((2 * K + 1, 2 * K + 1), dtype=complex))

    @classmethod
    def from_modes(cls, K: int, modes: dict[tuple[int, int], complex]) -> "SpectralField":
        """Build a field from ``{(k1, k2): coeff}``; the conjugate partner is filled in."""
        c = np.zeros((2 * K + 1, 2 * K + 1), dtype=complex)
        for (k1, k2), val in modes.items():
            if (k1, k2) == (0, 0):
                raise ValueError("mode (0,0) carries no data for zero-mean fields")
            c[k1 + K, k2 + K] = val
            c[-k1 + K, -k2 + K] = np.conj(val)
        return cls(c)

    def __getitem__(self, k: tuple[int, int]) -> complex:
        K = self.cutoff
        return complex(self.coeffs[k[0] + K, k[1] + K])

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.coeffs - other.coeffs)

    def __mul__(self, a: float) -> "SpectralField":
        return SpectralField(self.coeffs * float(a))

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class GridField:
    """Real samples on the uniform ``n x n`` collocation grid."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"grid values must be square n x n, got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class VectorSpectralField:
    """Two-component field ``(u1, u2)``; coefficient array of shape ``(2, 2K+1, 2K+1)``."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim != 3 or c.shape[0] != 2:
            raise ValueError(f"vector coefficients must have shape (2, 2K+1, 2K+1), got {c.shape}")
        cutoff_of(c)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def cutoff(self) -> int:
        return cutoff_of(self.coeffs)

    @property
    def u1(self) -> SpectralField:
        return SpectralField(self.coeffs[0])

    @property
    def u2(self) -> SpectralField:
        return SpectralField(self.coeffs[1])

    def divergence_defect(self) -> float:
        """``max_k |k . coeff(k)|``, zero for exactly divergence-free fields."""
        k1, k2 = wavenumbers(self.cutoff)
        return float(np.max(np.abs(k1 * self.coeffs[0] + k2 * self.coeffs[1])))


# ---------------------------------------------------------------------------
# transforms on raw arrays (batched)


def grid_points(n: int) -> tuple[np.ndarray, np.ndarray]:
    x = TWO_PI * np.arange(n) / n
    return np.meshgrid(x, x, indexing="ij")


def _check_grid(K: int, n: int) -> None:
    if n < 2 * K + 2:
        raise AliasingError(f"grid n={n} aliases cutoff K={K}; need n >= 2K+2 = {2 * K + 2}")


def synthesize(coeffs: np.ndarray, n: int) -> np.ndarray:
    """Grid values of ``sum_k coeff(k) e_k(x)`` for Hermitian ``coeffs``."""
    K = cutoff_of(coeffs)
    _check_grid(K, n)
    half = np.zeros(coeffs.shape[:-2] + (n, n // 2 + 1), dtype=complex)
    rows = np.arange(-K, K + 1) % n
    half[..., rows, : K + 1] = coeffs[..., :, K:]
    return scipy.fft.irfft2(half, s=(n, n), axes=(-2, -1)) * (n * n / TWO_PI)


def analyze(values: np.ndarray, K: int) -> np.ndarray:
    """Coefficients ``<f, e_k>`` for ``|k_i| <= K`` by trapezoidal quadrature; mean dropped."""
    n = values.shape[-1]
    _check_grid(K, n)
    half = scipy.fft.rfft2(values, axes=(-2, -1)) * (TWO_PI / (n * n))
    rows = np.arange(-K, K + 1) % n
    out = np.empty(values.shape[:-2] + (2 * K + 1, 2 * K + 1), dtype=complex)
    out[..., :, K:] = half[..., rows, : K + 1]
    # negative k2 columns from symmetry
    out[..., :, :K] = np.conj(out[..., ::-1, : K : -1])
    # k2 = 0 column: enforce exact pairing
    col = out[..., :, K]
    out[..., :, K] = 0.5 * (col + np.conj(col[..., ::-1]))
    out[..., K, K] = 0.0
    return out


def _field_norm(f: np.ndarray, p: float, w: float) -> float:
    f = np.array(f, order="C")  # fresh aligned buffer
    s = float(np.sum(f * f) if p == 2 else np.sum(np.abs(f) ** p))
    return (w * s) ** (1.0 / p)


def grid_lp_norm(values: np.ndarray, p: float) -> np.ndarray:
    """Quadrature L^p norm over the trailing two axes (batched).

    NumPy's SIMD power and sum kernels round differently depending on where
    data sits in memory, so each field is reduced from its own fresh buffer:
    a field's norm is then the same bits whether or not it is part of a batch.
    """
    n = values.shape[-1]
    w = (TWO_PI / n) ** 2
    flat = values.reshape((-1,) + values.shape[-2:])
    return np.array([_field_norm(f, p, w) for f in flat]).reshape(values.shape[:-2])


def point_values(coeffs: np.ndarray, x) -> np.ndarray:
    """Exact evaluation ``sum_k coeff(k) e_k(x)`` at one point ``x``."""
    K = cutoff_of(coeffs)
    k = np.arange(-K, K + 1)
    e1 = np.exp(1j * k * x[0])
    e2 = np.exp(1j * k * x[1])
    return np.real(np.einsum("...ab,a,b->...", coeffs, e1, e2)) / TWO_PI


def dealias_mask(K: int) -> np.ndarray:
    k1, k2 = wavenumbers(K)
    band = (2 * K) // 3
    return (np.abs(k1) <= band) & (np.abs(k2) <= band)


def truncate(coeffs: np.ndarray, K_new: int) -> np.ndarray:
    K = cutoff_of(coeffs)
    if K_new > K:
        out = np.zeros(coeffs.shape[:-2] + (2 * K_new + 1,) * 2, dtype=coeffs.dtype)
        out[..., K_new - K : K_new + K + 1, K_new - K : K_new + K + 1] = coeffs
        return out
    return coeffs[..., K - K_new : K + K_new + 1, K - K_new : K + K_new + 1]


# ---------------------------------------------------------------------------
# field-level operations


def to_grid(f: SpectralField, n: int) -> GridField:
    return GridField(synthesize(f.coeffs, n))


def from_grid(g: GridField, cutoff: int) -> SpectralField:
    if not np.all(np.isfinite(g.values)):
        raise ValueError("grid contains non-finite samples")
    if cutoff > (g.n - 2) // 2:
        raise AliasingError(f"cutoff {cutoff} exceeds (n-2)/2 for n={g.n}")
    return SpectralField(analyze(g.values, cutoff))


def apply_A_power(f: SpectralField, b: float) -> SpectralField:
    """``A^b f`` with ``A = -Laplacian``: multiply mode ``k`` by ``|k|^{2b}``."""
    lam = ksq(f.cutoff).copy()
    K = f.cutoff
    lam[K, K] = 1.0
    mult = lam**b
    mult[K, K] = 0.0
    return SpectralField(f.coeffs * mult)


def lp_norm(g: GridField, p: float) -> float:
    if not p >= 1:
        raise ValueError(f"L^p norm requires p >= 1, got p={p}")
    return float(grid_lp_norm(g.values, p))


def dealias(f: SpectralField) -> SpectralField:
    """2/3 rule: zero modes with ``max(|k1|, |k2|) > floor(2K/3)``."""
    return SpectralField(np.where(dealias_mask(f.cutoff), f.coeffs, 0.0))


def l2_norm_spectral(coeffs: np.ndarray) -> np.ndarray:
    """Parseval norm ``(sum_k |coeff(k)|^2)^{1/2}``, reduced field by field like ``grid_lp_norm``."""
    flat = np.asarray(coeffs).reshape((-1,) + np.shape(coeffs)[-2:])
    out = [float(np.sum(np.array(f.real, order="C") ** 2 + np.array(f.imag, order="C") ** 2)) ** 0.5 for f in flat]
    return np.array(out).reshape(np.shape(coeffs)[:-2])


def random_field(K: int, rng: np.random.Generator, band: int | None = None, decay: float = 1.0) -> SpectralField:
    """Random Hermitian field, amplitudes ~ |k|^{-decay}, restricted to ``max|k_i| <= band``."""
    band = K if band is None else band
    c = (rng.standard_normal((2 * K + 1,) * 2) + 1j * rng.standard_normal((2 * K + 1,) * 2)) / np.sqrt(2)
    lam = ksq(K).copy()
    lam[K, K] = 1.0
    c = c * lam ** (-decay / 2)
    k1, k2 = wavenumbers(K)
    c = np.where((np.abs(k1) <= band) & (np.abs(k2) <= band), c, 0.0)
    c = 0.5 * (c + conj_flip(c))
    c[K, K] = 0.0
    return SpectralField(c)
