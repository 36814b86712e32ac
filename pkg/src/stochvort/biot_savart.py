"""Velocity from vorticity, the transport nonlinearity ``q = v xi`` and its L^p truncation."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .spectral import (
    SpectralField,
    VectorSpectralField,
    analyze,
    cutoff_of,
    dealias_mask,
    grid_lp_norm,
    ksq,
    random_field,
    synthesize,
    wavenumbers,
)


@dataclass(frozen=True)
class TruncationSpec:
    level: float = 1e6
    p: float = 6.0

    def __post_init__(self):
        if not self.level >= 1:
            raise ValueError(f"truncation level requires N >= 1, got N={self.level}")
        if not self.p > 2:
            raise ValueError(f"truncation norm requires p > 2, got p={self.p}")


@lru_cache(maxsize=32)
def _bs_multiplier(K: int) -> tuple[np.ndarray, np.ndarray]:
    k1, k2 = wavenumbers(K)
    lam = ksq(K).copy()
    lam[K, K] = 1.0
    # v_hat = -i kperp xi_hat / |k|^2 with kperp = (-k2, k1)
    m1 = 1j * k2 / lam
    m2 = -1j * k1 / lam
    m1[K, K] = 0.0
    m2[K, K] = 0.0
    m1.setflags(write=False)
    m2.setflags(write=False)
    return m1, m2


def velocity_coeffs(xi: np.ndarray) -> np.ndarray:
    """Batched Biot-Savart: ``(..., 2K+1, 2K+1) -> (..., 2, 2K+1, 2K+1)``."""
    m1, m2 = _bs_multiplier(cutoff_of(xi))
    return np.stack([m1 * xi, m2 * xi], axis=-3)


def velocity(xi: SpectralField) -> VectorSpectralField:
    return VectorSpectralField(velocity_coeffs(xi.coeffs))


def curl_coeffs(v: np.ndarray) -> np.ndarray:
    """``curl_perp v = d1 v2 - d2 v1`` in coefficient space."""
    k1, k2 = wavenumbers(cutoff_of(v))
    return 1j * (k1 * v[..., 1, :, :] - k2 * v[..., 0, :, :])


def theta(s, spec: TruncationSpec):
    """C^1 cutoff: 1 below N, 0 above N+1, cubic smoothstep in between."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("truncation factor requires s >= 0")
    u = np.clip(s - spec.level, 0.0, 1.0)
    out = 1.0 - 3.0 * u * u + 2.0 * (u * u * u)
    return out if out.ndim else float(out)


def theta_prime(s, spec: TruncationSpec):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("truncation factor requires s >= 0")
    u = np.clip(s - spec.level, 0.0, 1.0)
    out = -6.0 * u + 6.0 * u * u
    return out if out.ndim else float(out)


def padded_size(K: int) -> int:
    """Smallest even grid on which products of band-K fields are alias-free on band K."""
    n = 3 * K + 1
    return n + (n % 2)


def product_coeffs(a_vec: np.ndarray, b: np.ndarray, n_pad: int | None = None) -> np.ndarray:
    """Coefficients of ``a_vec * b`` (vector times scalar) retained on band K, without aliasing."""
    K = cutoff_of(b)
    n_pad = padded_size(K) if n_pad is None else n_pad
    av = synthesize(a_vec, n_pad)
    bv = synthesize(b, n_pad)
    return analyze(av * bv[..., None, :, :], K)


def q_coeffs(xi: np.ndarray) -> np.ndarray:
    """``q(xi) = v xi`` projected on band K; batched."""
    return product_coeffs(velocity_coeffs(xi), xi)


def q(xi: SpectralField) -> VectorSpectralField:
    """Transport flux ``v xi`` projected on band K; the product is formed on a padded grid."""
    return VectorSpectralField(q_coeffs(xi.coeffs))


def field_lp_norm(xi: np.ndarray, n: int, p: float) -> np.ndarray:
    """Quadrature L^p norm on the ``n x n`` collocation grid (batched)."""
    return grid_lp_norm(synthesize(xi, n), p)


def q_truncated(xi: SpectralField, spec: TruncationSpec, n: int) -> VectorSpectralField:
    """``Theta_N(||xi||_p) q(xi)``; the norm uses the ``n x n`` grid."""
    s = float(field_lp_norm(xi.coeffs, n, spec.p))
    return VectorSpectralField(theta(s, spec) * q(xi).coeffs)


def q_tilde(xi: SpectralField, spec: TruncationSpec, n: int) -> VectorSpectralField:
    s = float(field_lp_norm(xi.coeffs, n, spec.p))
    return VectorSpectralField(theta_prime(s, spec) * q(xi).coeffs)


def vector_lp_norm(vec: np.ndarray, n: int, p: float) -> np.ndarray:
    """L^p norm of the Euclidean magnitude of a vector field."""
    g = synthesize(vec, n)
    mag = np.sqrt(g[..., 0, :, :] ** 2 + g[..., 1, :, :] ** 2)
    return grid_lp_norm(mag, p)


def lipschitz_probe(
    spec: TruncationSpec,
    trials: int,
    seed: int,
    K: int = 21,
    n: int = 64,
) -> float:
    """Largest observed ``||q_N(xi) - q_N(eta)||_p / ||xi - eta||_p`` over random pairs.

    Pairs are drawn with norms spread over ``[0, 2(N+1)]`` so all truncation
    regimes are visited.
    """
    if trials < 1:
        raise ValueError("lipschitz probe needs trials >= 1")
    mask = dealias_mask(K)
    worst = 0.0
    for i in range(trials):
        rng = np.random.default_rng([seed, i])
        pair = []
        for _ in range(2):
            f = np.where(mask, random_field(K, rng, decay=1.5).coeffs, 0.0)
            target = rng.uniform(0.0, 2.0 * (spec.level + 1.0))
            f = f * (target / float(field_lp_norm(f, n, spec.p)))
            pair.append(f)
        if i % 4 == 0:
            # close pairs probe the local constant
            pair[1] = pair[0] + 1e-3 * (pair[1] - pair[0])
        a, b = pair
        diff = float(field_lp_norm(a - b, n, spec.p))
        if diff == 0.0:
            continue
        qa = theta(float(field_lp_norm(a, n, spec.p)), spec) * q_coeffs(a)
        qb = theta(float(field_lp_norm(b, n, spec.p)), spec) * q_coeffs(b)
        worst = max(worst, float(vector_lp_norm(qa - qb, n, spec.p)) / diff)
    return worst
