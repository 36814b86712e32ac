"""Periodic heat kernel on the torus, the heat semigroup and the Duhamel operator J.

Both series factorize over the two coordinates, so every evaluator works with
1D sums.  With ``d = x - y``:

* Fourier form: ``g = F(d1) F(d2) / (2 pi)^2`` with ``F(d) = sum_{|m|<=M} exp(-t m^2) cos(m d)``.
* Images form: ``g = G(d1) G(d2)`` with
  ``G(d) = (4 pi t)^{-1/2} sum_{|k|<=R} exp(-(d + 2 pi k)^2 / 4t)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import TWO_PI, GridField, SpectralField, cutoff_of, ksq, synthesize, wavenumbers

IMAGES_MAX_T = 0.5


@dataclass(frozen=True)
class KernelEvalSpec:
    t: float
    image_radius: int = 3
    fourier_cutoff: int = 20

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError(f"heat kernel requires t > 0, got t={self.t}")
        if self.image_radius < 1 or self.fourier_cutoff < 1:
            raise ValueError("truncation radii must satisfy R >= 1 and M >= 1")


def _fourier_1d(d: np.ndarray, t: float, M: int) -> np.ndarray:
    m = np.arange(1, M + 1)
    w = np.exp(-t * m * m)
    return 1.0 + 2.0 * np.cos(np.multiply.outer(d, m)) @ w


def _images_1d(d: np.ndarray, t: float, R: int, derivative: bool = False) -> np.ndarray:
    shifts = np.multiply.outer(d, np.ones(2 * R + 1)) + TWO_PI * np.arange(-R, R + 1)
    e = np.exp(-(shifts**2) / (4.0 * t))
    norm = 1.0 / np.sqrt(4.0 * np.pi * t)
    if derivative:
        # dG/dd
        return -norm * np.sum(e * shifts, axis=-1) / (2.0 * t)
    return norm * np.sum(e, axis=-1)


def _diff(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x - y
    # reduce to [-pi, pi) so the image sum is centred
    d = np.mod(d + np.pi, TWO_PI) - np.pi
    return d[..., 0], d[..., 1]


def eval_fourier(spec: KernelEvalSpec, x, y) -> np.ndarray:
    """Truncated Fourier series of ``g(t, x, y)``; ``x``, ``y`` have trailing axis of length 2."""
    d1, d2 = _diff(x, y)
    M = spec.fourier_cutoff
    return _fourier_1d(d1, spec.t, M) * _fourier_1d(d2, spec.t, M) / TWO_PI**2


def eval_images(spec: KernelEvalSpec, x, y) -> np.ndarray:
    """Truncated image sum of ``g(t, x, y)``."""
    d1, d2 = _diff(x, y)
    R = spec.image_radius
    return _images_1d(d1, spec.t, R) * _images_1d(d2, spec.t, R)


def eval_grad(spec: KernelEvalSpec, x, y) -> np.ndarray:
    """``grad_y g(t, x, y)`` from the image sum, stacked on a trailing axis of length 2."""
    d1, d2 = _diff(x, y)
    t, R = spec.t, spec.image_radius
    g1, g2 = _images_1d(d1, t, R), _images_1d(d2, t, R)
    # d = x - y, so d/dy = -d/dd
    dg1 = -_images_1d(d1, t, R, derivative=True)
    dg2 = -_images_1d(d2, t, R, derivative=True)
    return np.stack([dg1 * g2, g1 * dg2], axis=-1)


def eval_kernel(spec: KernelEvalSpec, x, y) -> np.ndarray:
    """Combined evaluator: images for ``t <= 0.5``, Fourier otherwise."""
    if spec.t <= IMAGES_MAX_T:
        return eval_images(spec, x, y)
    return eval_fourier(spec, x, y)


# ---------------------------------------------------------------------------
# semigroup and Duhamel operator


def heat_multiplier(K: int, t: float) -> np.ndarray:
    return np.exp(-ksq(K) * t)


def phi_multiplier(K: int, dt: float) -> np.ndarray:
    """Mode-wise ``(1 - exp(-|k|^2 dt)) / |k|^2``, with value ``dt`` at ``k = 0``."""
    lam = ksq(K)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = -np.expm1(-lam * dt) / lam
    out[K, K] = dt
    return out


def semigroup_apply(t: float, f: SpectralField) -> SpectralField:
    if t < 0:
        raise ValueError(f"semigroup requires t >= 0, got t={t}")
    return SpectralField(f.coeffs * heat_multiplier(f.cutoff, t))


def neg_divergence(vec: np.ndarray) -> np.ndarray:
    """Coefficients of ``-div u`` for vector coefficients ``(..., 2, 2K+1, 2K+1)``."""
    K = cutoff_of(vec)
    k1, k2 = wavenumbers(K)
    return -1j * (k1 * vec[..., 0, :, :] + k2 * vec[..., 1, :, :])


def duhamel_coeffs(phi: np.ndarray, dt: float) -> np.ndarray:
    """Spectral ``J phi`` at ``t = len(phi) * dt`` from slices at ``s_i = i dt``.

    Left-endpoint in the forcing, exact in the exponential: slice ``i`` is
    weighted by ``exp(-|k|^2 (t - s_{i+1})) (1 - exp(-|k|^2 dt)) / |k|^2``.
    """
    phi = np.asarray(phi)
    if phi.shape[0] == 0:
        raise ValueError("apply_J needs at least one time slice")
    K = cutoff_of(phi)
    steps = phi.shape[0]
    lam = ksq(K)
    w = phi_multiplier(K, dt)
    lags = (steps - 1 - np.arange(steps))[:, None, None]
    weights = np.exp(-lam[None] * lags * dt) * w
    return np.sum(weights * neg_divergence(phi), axis=0)


def apply_J(phi: np.ndarray, dt: float, n: int) -> GridField:
    """Grid values of ``J phi`` at the end of the mesh; ``phi`` has shape ``(steps, 2, 2K+1, 2K+1)``."""
    return GridField(synthesize(duhamel_coeffs(phi, dt), n))


# ---------------------------------------------------------------------------
# L^beta integrals of the kernel and its gradient


def kernel_lp_integral(
    beta: float,
    s: float,
    gradient: bool,
    x=(0.0, 0.0),
    n_quad: int = 512,
    image_radius: int = 3,
) -> float:
    """Midpoint-rule value of ``int_D |g(s,x,y)|^beta dy`` (or ``|grad_y g|^beta``).

    The quadrature nodes sit at ``y = x - d`` with ``d`` on the midpoint grid of
    ``[-pi, pi)``, so the node set follows ``x`` around the torus.
    """
    if not s > 0:
        raise ValueError(f"kernel integral requires s > 0, got s={s}")
    if gradient and not 0 < beta < 4.0 / 3.0:
        raise ValueError(f"gradient estimate requires 0 < beta < 4/3, got beta={beta}")
    if not gradient and not 0 < beta < 2:
        raise ValueError(f"kernel estimate requires 0 < beta < 2, got beta={beta}")
    h = TWO_PI / n_quad
    d = -np.pi + (np.arange(n_quad) + 0.5) * h
    x = np.asarray(x, dtype=float)
    y1 = np.mod(x[0] - d, TWO_PI)
    y2 = np.mod(x[1] - d, TWO_PI)
    d1 = np.mod(x[0] - y1 + np.pi, TWO_PI) - np.pi
    d2 = np.mod(x[1] - y2 + np.pi, TWO_PI) - np.pi
    spec = KernelEvalSpec(s, image_radius=image_radius)
    if spec.t <= IMAGES_MAX_T:
        G1, G2 = _images_1d(d1, s, image_radius), _images_1d(d2, s, image_radius)
    else:
        M = spec.fourier_cutoff
        G1, G2 = _fourier_1d(d1, s, M) / TWO_PI, _fourier_1d(d2, s, M) / TWO_PI
    if gradient:
        dG1 = _images_1d(d1, s, image_radius, derivative=True)
        dG2 = _images_1d(d2, s, image_radius, derivative=True)
        mag = np.sqrt(np.multiply.outer(dG1 * dG1, G2 * G2) + np.multiply.outer(G1 * G1, dG2 * dG2))
    else:
        mag = np.abs(np.multiply.outer(G1, G2))
    return float(np.sum(mag**beta) * h * h)


def fit_slope(s: np.ndarray, values: np.ndarray) -> float:
    """Least-squares slope of ``log values`` against ``log s``."""
    return float(np.polyfit(np.log(s), np.log(values), 1)[0])


def kernel_target_slope(beta: float, gradient: bool) -> float:
    return -1.5 * beta + 1.0 if gradient else 1.0 - beta
