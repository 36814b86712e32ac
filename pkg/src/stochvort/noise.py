"""Q-Wiener noise with ``Q = (-Laplacian)^{-b}`` and the exact stochastic convolution.

The noise is expanded in the real orthonormal basis indexed by the half lattice
``Z^2_+ = {k1 > 0} U {k1 = 0, k2 > 0}``:

    f_cos(k) = cos(k.x) / (sqrt(2) pi),   f_sin(k) = sin(k.x) / (sqrt(2) pi).

Direction ``j`` runs over all cosines first, then all sines.  Each Fourier mode
of the stochastic convolution is an Ornstein-Uhlenbeck process and is advanced
with its exact transition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .spectral import TWO_PI, grid_lp_norm, ksq, point_values, synthesize

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class NoiseSpec:
    b: float = 2.0
    cutoff: int = 21
    dt: float = 0.01
    steps: int = 100
    seed: int = 0
    amplitude: float = 1.0
    mode_mask: tuple[bool, ...] | None = field(default=None, compare=True)

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError(f"noise covariance requires b > 0, got b={self.b}")
        if self.cutoff < 1:
            raise ValueError("noise cutoff must be >= 1")
        if not self.dt > 0:
            raise ValueError(f"noise requires dt > 0, got dt={self.dt}")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.mode_mask is not None and len(self.mode_mask) != n_directions(self.cutoff):
            raise ValueError("mode mask length must equal the number of noise directions")

    @property
    def n_directions(self) -> int:
        return n_directions(self.cutoff)


@lru_cache(maxsize=32)
def half_lattice(K_w: int) -> np.ndarray:
    """Wave vectors of ``Z^2_+`` with ``|k_i| <= K_w``, shape ``(m, 2)``."""
    ks = [(k1, k2) for k1 in range(0, K_w + 1) for k2 in range(-K_w, K_w + 1) if k1 > 0 or k2 > 0]
    out = np.array(ks, dtype=int)
    out.setflags(write=False)
    return out


def n_directions(K_w: int) -> int:
    return 2 * len(half_lattice(K_w))


def direction_wavevector(K_w: int, j: int) -> tuple[tuple[int, int], str]:
    """Wave vector and ``'cos'``/``'sin'`` label of direction ``j``."""
    ks = half_lattice(K_w)
    m = len(ks)
    kind = "cos" if j < m else "sin"
    k = ks[j % m]
    return (int(k[0]), int(k[1])), kind


def basis_coeffs(K: int, K_w: int, j: int) -> np.ndarray:
    """Coefficients of the unit basis element ``f_j`` on cutoff ``K``."""
    if K_w > K:
        raise ValueError(f"noise cutoff {K_w} exceeds field cutoff {K}")
    (k1, k2), kind = direction_wavevector(K_w, j)
    c = np.zeros((2 * K + 1, 2 * K + 1), dtype=complex)
    val = 1.0 / SQRT2 if kind == "cos" else -1j / SQRT2
    c[k1 + K, k2 + K] = val
    c[-k1 + K, -k2 + K] = np.conj(val)
    return c


def mode_scale(spec: NoiseSpec) -> np.ndarray:
    """Per-direction amplitude ``sigma_j`` such that ``sum_j sigma_j dB_j f_j`` is the exact OU increment."""
    ks = half_lattice(spec.cutoff)
    lam = (ks[:, 0] ** 2 + ks[:, 1] ** 2).astype(float)
    # variance of the exact OU increment divided by dt
    ou = -np.expm1(-2.0 * lam * spec.dt) / (2.0 * lam * spec.dt)
    s = spec.amplitude * lam ** (-spec.b / 2.0) * np.sqrt(ou)
    s = np.concatenate([s, s])
    if spec.mode_mask is not None:
        s = s * np.asarray(spec.mode_mask, dtype=float)
    return s


@lru_cache(maxsize=32)
def _scatter_index(K: int, K_w: int) -> tuple[np.ndarray, np.ndarray]:
    ks = half_lattice(K_w)
    plus = (ks[:, 0] + K) * (2 * K + 1) + (ks[:, 1] + K)
    minus = (-ks[:, 0] + K) * (2 * K + 1) + (-ks[:, 1] + K)
    return plus, minus


def increments_to_coeffs(weighted: np.ndarray, K: int, K_w: int) -> np.ndarray:
    """Map weights ``w_j`` on the real basis to field coefficients of ``sum_j w_j f_j``.

    ``weighted`` has shape ``(..., n_dirs)``; the result has shape ``(..., 2K+1, 2K+1)``.
    """
    if K_w > K:
        raise ValueError(f"noise cutoff {K_w} exceeds field cutoff {K}")
    m = len(half_lattice(K_w))
    a = weighted[..., :m]
    s = weighted[..., m:]
    plus, minus = _scatter_index(K, K_w)
    vals = (a - 1j * s) / SQRT2
    out = np.zeros(weighted.shape[:-1] + ((2 * K + 1) ** 2,), dtype=complex)
    out[..., plus] = vals
    out[..., minus] = np.conj(vals)
    return out.reshape(weighted.shape[:-1] + (2 * K + 1, 2 * K + 1))


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True, eq=False)
class NoisePath:
    """Brownian increments ``dB[m, j] ~ N(0, dt)`` for timestep ``m`` and direction ``j``."""

    increments: np.ndarray
    dt: float

    @property
    def steps(self) -> int:
        return self.increments.shape[0]


def make_generator(seed: int, sample: int = 0) -> np.random.Generator:
    """Counter-based stream keyed by ``(seed, sample)``; independent of scheduling."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(sample)])))


def sample_noise_path(spec: NoiseSpec, sample: int = 0, steps: int | None = None) -> NoisePath:
    """Draw the increments of one realization.

    Normals are consumed in (timestep, direction) order, so a shorter path is a
    bit-exact prefix of a longer one drawn from the same key.
    """
    steps = spec.steps if steps is None else steps
    rng = make_generator(spec.seed, sample)
    inc = rng.standard_normal((steps, spec.n_directions)) * np.sqrt(spec.dt)
    return NoisePath(inc, spec.dt)


def noise_coeffs(spec: NoiseSpec, path: NoisePath, K: int) -> np.ndarray:
    """Per-step OU increments ``eta_m`` as field coefficients, shape ``(steps, 2K+1, 2K+1)``."""
    return increments_to_coeffs(path.increments * mode_scale(spec), K, spec.cutoff)


def sample_convolution(spec: NoiseSpec, K: int | None = None, sample: int = 0) -> np.ndarray:
    """Exact path of ``z`` on ``t_m = m dt``, ``m = 0..steps``; shape ``(steps+1, 2K+1, 2K+1)``."""
    K = spec.cutoff if K is None else K
    eta = noise_coeffs(spec, sample_noise_path(spec, sample), K)
    decay = np.exp(-ksq(K) * spec.dt)
    z = np.zeros((spec.steps + 1, 2 * K + 1, 2 * K + 1), dtype=complex)
    for m in range(spec.steps):
        z[m + 1] = decay * z[m] + eta[m]
    return z


def sample_convolution_final(spec: NoiseSpec, samples, K: int | None = None) -> np.ndarray:
    """``z(steps * dt)`` for each sample id in ``samples``; shape ``(len(samples), 2K+1, 2K+1)``."""
    K = spec.cutoff if K is None else K
    ks = half_lattice(spec.cutoff)
    lam = (ks[:, 0] ** 2 + ks[:, 1] ** 2).astype(float)
    lags = (spec.steps - 1 - np.arange(spec.steps))[:, None]
    # z(T) = sum_m S((steps-1-m) dt) eta_m, accumulated on the half lattice
    w = np.exp(-np.concatenate([lam, lam])[None, :] * lags * spec.dt) * mode_scale(spec)
    acc = np.empty((len(samples), spec.n_directions))
    for i, s in enumerate(samples):
        acc[i] = np.sum(w * sample_noise_path(spec, s).increments, axis=0)
    return increments_to_coeffs(acc, K, spec.cutoff)


def basis_point_values(K_w: int, x) -> np.ndarray:
    """``f_j(x)`` for every direction ``j``."""
    ks = half_lattice(K_w)
    phase = ks[:, 0] * x[0] + ks[:, 1] * x[1]
    return np.concatenate([np.cos(phase), np.sin(phase)]) / (SQRT2 * np.pi)


def sample_point_values(spec: NoiseSpec, samples, x) -> np.ndarray:
    """``z(steps * dt, x)`` for each sample id, without forming full fields."""
    ks = half_lattice(spec.cutoff)
    lam = (ks[:, 0] ** 2 + ks[:, 1] ** 2).astype(float)
    lags = (spec.steps - 1 - np.arange(spec.steps))[:, None]
    w = np.exp(-np.concatenate([lam, lam])[None, :] * lags * spec.dt) * mode_scale(spec)
    w = w * basis_point_values(spec.cutoff, x)
    return np.array([np.sum(w * sample_noise_path(spec, s).increments) for s in samples])


# ---------------------------------------------------------------------------
# closed forms


def lattice_sum(K_w: int, power: float, weight=None) -> float:
    """``sum_{k != 0, |k_i| <= K_w} |k|^{-2 power} * weight(|k|^2)``."""
    lam = ksq(K_w).ravel()
    lam = lam[lam > 0]
    terms = lam ** (-power)
    if weight is not None:
        terms = terms * weight(lam)
    return float(np.sum(terms))


@dataclass(frozen=True)
class TraceReport:
    value: float
    tail_bound: float
    cutoff: int


def trace_q(b: float, cutoff: int, untruncated: bool = False) -> TraceReport:
    """Truncated ``Tr Q = sum |k|^{-2b}`` with a bound on the omitted tail.

    The tail over ``max|k_i| > K_w`` is bounded by
    ``2 pi int_{u0}^inf (u + c) u^{-2b} du`` with ``c = sqrt(2)/2`` and
    ``u0 = K_w + 1/2 - c``, from comparing each lattice point with its unit cell.
    """
    if untruncated and not b > 1:
        raise ValueError(f"Tr Q diverges: trace-class covariance requires b > 1, got b={b}")
    value = lattice_sum(cutoff, b)
    if b > 1:
        c = SQRT2 / 2
        u0 = cutoff + 0.5 - c
        tail = TWO_PI * (u0 ** (2 - 2 * b) / (2 * b - 2) + c * u0 ** (1 - 2 * b) / (2 * b - 1))
    else:
        tail = float("inf")
    return TraceReport(value, tail, cutoff)


def convolution_variance(b: float, t: float, cutoff: int, amplitude: float = 1.0) -> float:
    """``Var z(t, x) = (2 pi)^{-2} sum |k|^{-2b} (1 - exp(-2|k|^2 t)) / (2|k|^2)``; independent of x."""
    if t < 0:
        raise ValueError("convolution variance requires t >= 0")
    s = lattice_sum(cutoff, b, lambda lam: -np.expm1(-2.0 * lam * t) / (2.0 * lam))
    return amplitude**2 * s / TWO_PI**2


def mode_variance(b: float, k: tuple[int, int], t: float) -> float:
    """``E|z_k(t)|^2`` of one complex Fourier coefficient."""
    lam = float(k[0] ** 2 + k[1] ** 2)
    return lam ** (-b) * -np.expm1(-2.0 * lam * t) / (2.0 * lam)


# ---------------------------------------------------------------------------
# path statistics


@dataclass(frozen=True)
class PathStatistics:
    sup_lp_moment: float
    stderr: float
    increment_lags: tuple[int, ...]
    max_increments: tuple[float, ...]


def path_statistics(spec: NoiseSpec, samples: int, p: float, n: int | None = None) -> PathStatistics:
    """Monte Carlo ``E[sup_t ||z(t)||_p^p]`` and max space-time increments over lags ``1, 2, 4`` steps."""
    if not p > 2:
        raise ValueError(f"path statistics require p > 2, got p={p}")
    K = spec.cutoff
    n = 2 * K + 2 if n is None else n
    lags = (4, 2, 1)
    sups = np.empty(samples)
    incs = np.zeros(len(lags))
    for s in range(samples):
        g = synthesize(sample_convolution(spec, K, s), n)
        sups[s] = np.max(grid_lp_norm(g, p) ** p)
        for i, lag in enumerate(lags):
            if lag < g.shape[0]:
                dtime = np.max(np.abs(g[lag:] - g[:-lag]))
                dspace = np.max(np.abs(np.roll(g, lag, axis=-1) - g))
                incs[i] = max(incs[i], dtime, dspace)
    se = float(np.std(sups, ddof=1) / np.sqrt(samples)) if samples > 1 else float("nan")
    return PathStatistics(float(np.mean(sups)), se, lags, tuple(float(v) for v in incs))


def z_at_point(coeffs: np.ndarray, x) -> np.ndarray:
    return point_values(coeffs, x)
