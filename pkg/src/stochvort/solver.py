"""Exponential-Euler integration of the truncated mild vorticity equation.

One step reads

    xi_{m+1} = S(dt) xi_m + Phi(dt) P[-div q_N(xi_m)] + eta_m,

with ``S`` the heat semigroup, ``Phi = (1 - exp(-|k|^2 dt)) / |k|^2``, ``P`` the
2/3 projection and ``eta_m`` the exact OU increment of the noise.  Every routine
is batched over a leading sample axis.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .biot_savart import TruncationSpec, padded_size, theta, velocity_coeffs
from .heat_kernel import heat_multiplier, neg_divergence, phi_multiplier
from .noise import (
    NoisePath,
    NoiseSpec,
    increments_to_coeffs,
    make_generator,
    mode_scale,
)
from .spectral import (
    SpectralField,
    analyze,
    cutoff_of,
    dealias_mask,
    grid_lp_norm,
    l2_norm_spectral,
    random_field,
    synthesize,
    truncate,
)

BLOWUP_L2 = 1e12
IC_KINDS = ("zero", "shear", "sin_cos", "random")


class BlowUpError(RuntimeError):
    def __init__(self, time: float, sample: int | None = None):
        self.time = time
        self.sample = sample
        where = "" if sample is None else f" in sample {sample}"
        super().__init__(f"solution blew up at t={time:.6g}{where} (L2 norm above {BLOWUP_L2:g} or non-finite)")


@dataclass(frozen=True)
class RunConfig:
    K: int = 21
    n: int = 64
    dt: float = 0.01
    T: float = 1.0
    b: float = 2.0
    N: float = 1e6
    p: float = 6.0
    seed: int = 0
    ic: str = "zero"
    ic_amplitude: float = 1.0
    ic_seed: int = 0
    nonlinear: bool = True
    noise_cutoff: int | None = None
    noise_amplitude: float = 1.0
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.K < 1:
            raise ValueError(f"cutoff requires K >= 1, got K={self.K}")
        if self.n < 2 * self.K + 2:
            raise ValueError(f"grid requires n >= 2K+2 = {2 * self.K + 2} to avoid aliasing, got n={self.n}")
        if not self.dt > 0:
            raise ValueError(f"timestep requires dt > 0, got dt={self.dt}")
        if not self.T >= self.dt:
            raise ValueError(f"horizon requires T >= dt, got T={self.T}, dt={self.dt}")
        if abs(self.steps * self.dt - self.T) > 1e-9 * max(1.0, self.T):
            raise ValueError(f"horizon T={self.T} must be an integer multiple of dt={self.dt}")
        if not self.b > 0:
            raise ValueError(f"noise covariance requires b > 0, got b={self.b}")
        TruncationSpec(self.N, self.p)
        if self.noise_cutoff is not None and not 1 <= self.noise_cutoff <= self.K:
            raise ValueError(f"noise cutoff requires 1 <= K_w <= K, got {self.noise_cutoff}")
        if self.noise_amplitude < 0:
            raise ValueError("noise amplitude must be >= 0")
        if self.ic not in IC_KINDS and not str(self.ic).endswith(".csv"):
            raise ValueError(f"unknown initial condition {self.ic!r}; expected one of {IC_KINDS} or a .csv path")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def K_w(self) -> int:
        return self.K if self.noise_cutoff is None else self.noise_cutoff

    @property
    def trunc(self) -> TruncationSpec:
        return TruncationSpec(self.N, self.p)

    def noise_spec(self) -> NoiseSpec:
        return NoiseSpec(
            b=self.b, cutoff=self.K_w, dt=self.dt, steps=self.steps, seed=self.seed, amplitude=self.noise_amplitude
        )

    def with_(self, **kw) -> "RunConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("extra")
        return d

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def initial_condition(cfg: RunConfig) -> np.ndarray:
    """Coefficients of the initial vorticity on cutoff ``cfg.K``."""
    K = cfg.K
    a = cfg.ic_amplitude
    if cfg.ic == "zero":
        return SpectralField.zeros(K).coeffs
    if cfg.ic == "shear":
        return SpectralField.from_modes(K, {(1, 0): -1j * np.pi * a}).coeffs
    if cfg.ic == "sin_cos":
        # sin(x1) + cos(2 x2)
        return SpectralField.from_modes(K, {(1, 0): -1j * np.pi * a, (0, 2): np.pi * a}).coeffs
    if cfg.ic == "random":
        rng = np.random.default_rng(cfg.ic_seed)
        c = np.where(dealias_mask(K), random_field(K, rng, decay=1.5).coeffs, 0.0)
        return c * (a / float(grid_lp_norm(synthesize(c, cfg.n), cfg.p)))
    from .io import read_spectral_csv

    f = read_spectral_csv(Path(cfg.ic))
    return truncate(f.coeffs, K) if f.cutoff != K else f.coeffs


# ---------------------------------------------------------------------------
# stepping


class Stepper:
    """Precomputed multipliers for one configuration."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        K = cfg.K
        self.decay = heat_multiplier(K, cfg.dt)
        self.forcing = phi_multiplier(K, cfg.dt) * dealias_mask(K)
        self.trunc = cfg.trunc
        self.scale = mode_scale(cfg.noise_spec())

    def lp_norm(self, xi: np.ndarray) -> np.ndarray:
        return grid_lp_norm(synthesize(xi, self.cfg.n), self.cfg.p)

    def drift(self, xi: np.ndarray, norms: np.ndarray | None = None, xi_grid: np.ndarray | None = None) -> np.ndarray:
        """``Phi P[-div q_N(xi)]``; zero when the nonlinearity is switched off.

        ``xi_grid`` may carry ``xi`` on the ``n x n`` grid to save a transform.
        """
        if not self.cfg.nonlinear:
            return np.zeros_like(xi)
        if norms is None:
            xi_grid = synthesize(xi, self.cfg.n) if xi_grid is None else xi_grid
            norms = grid_lp_norm(xi_grid, self.cfg.p)
        th = np.asarray(theta(norms, self.trunc))
        n_pad = padded_size(self.cfg.K)
        b_pad = xi_grid if (xi_grid is not None and self.cfg.n == n_pad) else synthesize(xi, n_pad)
        flux = analyze(synthesize(velocity_coeffs(xi), n_pad) * b_pad[..., None, :, :], self.cfg.K)
        return self.forcing * neg_divergence(flux * th[..., None, None, None])

    def eta(self, increments: np.ndarray) -> np.ndarray:
        return increments_to_coeffs(increments * self.scale, self.cfg.K, self.cfg.K_w)

    def step(
        self,
        xi: np.ndarray,
        eta: np.ndarray,
        norms: np.ndarray | None = None,
        xi_grid: np.ndarray | None = None,
    ) -> np.ndarray:
        return self.decay * xi + self.drift(xi, norms, xi_grid) + eta


def step(xi: SpectralField, z_incr: np.ndarray | SpectralField, cfg: RunConfig) -> SpectralField:
    """Advance one field by one step; ``z_incr`` is the OU increment ``eta_m``."""
    if isinstance(z_incr, SpectralField):
        z_incr = z_incr.coeffs
    if cutoff_of(z_incr) != xi.cutoff:
        raise ValueError("state and noise increment must share the cutoff")
    out = Stepper(cfg).step(xi.coeffs, z_incr)
    _guard(out, cfg.dt)
    return SpectralField(out)


def _guard(xi: np.ndarray, t: float, samples=None) -> None:
    l2 = np.sqrt(np.sum(np.abs(xi) ** 2, axis=(-2, -1)))
    bad = ~np.isfinite(l2) | (l2 > BLOWUP_L2)
    if np.any(bad):
        idx = int(np.flatnonzero(np.atleast_1d(bad))[0])
        sample = None if samples is None else int(samples[idx])
        raise BlowUpError(t, sample)


# ---------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States on ``t_m = m dt``; ``sigma_hit`` is the first grid time with ``||xi||_p >= N``."""

    cfg: RunConfig
    times: np.ndarray
    states: np.ndarray
    z_states: np.ndarray
    lp_norms: np.ndarray
    l2_norms: np.ndarray
    sigma_hit: float | None
    noise: NoisePath

    def __post_init__(self):
        for a in (self.times, self.states, self.z_states, self.lp_norms, self.l2_norms):
            a.setflags(write=False)


def first_hit(norms: np.ndarray, N: float, dt: float) -> float | None:
    hits = np.flatnonzero(norms >= N)
    return float(hits[0] * dt) if hits.size else None


def run(cfg: RunConfig, sample: int = 0, path: NoisePath | None = None, xi0: np.ndarray | None = None) -> Trajectory:
    """Integrate one realization over ``[0, T]``.

    Increments with timestep index ``m`` enter only at step ``m``, so the
    first ``m+1`` states depend on the first ``m`` rows of the noise path alone.
    """
    st = Stepper(cfg)
    steps = cfg.steps
    if path is None:
        rng = make_generator(cfg.seed, sample)
        inc = rng.standard_normal((steps, st.scale.size)) * np.sqrt(cfg.dt)
        path = NoisePath(inc, cfg.dt)
    elif path.steps < steps:
        raise ValueError(f"noise path has {path.steps} steps, run needs {steps}")
    xi = initial_condition(cfg) if xi0 is None else np.array(xi0, dtype=complex)
    K = cfg.K
    states = np.empty((steps + 1, 2 * K + 1, 2 * K + 1), dtype=complex)
    zs = np.empty_like(states)
    lp = np.empty(steps + 1)
    states[0] = xi
    zs[0] = 0.0
    grid = synthesize(xi, cfg.n)
    lp[0] = grid_lp_norm(grid, cfg.p)
    eta = st.eta(path.increments[:steps])
    for m in range(steps):
        states[m + 1] = st.step(states[m], eta[m], lp[m], grid)
        zs[m + 1] = st.decay * zs[m] + eta[m]
        _guard(states[m + 1], (m + 1) * cfg.dt, [sample])
        grid = synthesize(states[m + 1], cfg.n)
        lp[m + 1] = grid_lp_norm(grid, cfg.p)
    l2 = l2_norm_spectral(states)
    times = np.arange(steps + 1) * cfg.dt
    return Trajectory(cfg, times, states, zs, lp, l2, first_hit(lp, cfg.N, cfg.dt), path)


@dataclass(frozen=True, eq=False)
class EnsembleRun:
    """Batched run output: states at ``record`` step indices and per-step norms up to the last record."""

    samples: np.ndarray
    record: np.ndarray
    states: np.ndarray  # (len(record), samples, 2K+1, 2K+1)
    z_states: np.ndarray
    lp_norms: np.ndarray  # (steps+1, samples)
    z_lp_norms: np.ndarray
    l2_norms: np.ndarray
    sigma_hit: list


def run_ensemble(
    cfg: RunConfig,
    samples,
    record=None,
    chunk: int = 256,
    track_z: bool = False,
) -> EnsembleRun:
    """Integrate many realizations in lockstep.

    Each sample draws from its own ``(seed, sample)`` stream row by row, which
    reproduces ``run(cfg, sample)`` bit for bit.  ``track_z`` adds the per-step
    L^p norm of the stochastic convolution.
    """
    samples = np.asarray(list(samples), dtype=int)
    record = np.array([cfg.steps] if record is None else record, dtype=int)
    if record.size == 0 or record.min() < 0 or record.max() > cfg.steps:
        raise ValueError(f"record indices must lie in [0, {cfg.steps}]")
    # integration stops at the last recorded state
    steps = int(record.max())
    st = Stepper(cfg)
    K = cfg.K
    shape = (len(record), len(samples), 2 * K + 1, 2 * K + 1)
    rec_states = np.empty(shape, dtype=complex)
    rec_z = np.empty(shape, dtype=complex)
    lp = np.empty((steps + 1, len(samples)))
    zlp = np.empty_like(lp)
    l2 = np.empty_like(lp)
    xi0 = initial_condition(cfg)
    sq = np.sqrt(cfg.dt)
    for lo in range(0, len(samples), chunk):
        ids = samples[lo : lo + chunk]
        gens = [make_generator(cfg.seed, s) for s in ids]
        xi = np.broadcast_to(xi0, (len(ids),) + xi0.shape).copy()
        z = np.zeros_like(xi)
        for m in range(steps + 1):
            grid = synthesize(xi, cfg.n)
            norms = grid_lp_norm(grid, cfg.p)
            lp[m, lo : lo + len(ids)] = norms
            zlp[m, lo : lo + len(ids)] = st.lp_norm(z) if track_z else np.nan
            l2[m, lo : lo + len(ids)] = l2_norm_spectral(xi)
            hit = np.flatnonzero(record == m)
            for r in hit:
                rec_states[r, lo : lo + len(ids)] = xi
                rec_z[r, lo : lo + len(ids)] = z
            if m == steps:
                break
            inc = np.stack([g.standard_normal(st.scale.size) for g in gens]) * sq
            eta = st.eta(inc)
            xi = st.step(xi, eta, norms, grid)
            z = st.decay * z + eta
            _guard(xi, (m + 1) * cfg.dt, ids)
    sigma = [first_hit(lp[:, i], cfg.N, cfg.dt) for i in range(len(samples))]
    return EnsembleRun(samples, record, rec_states, rec_z, lp, zlp, l2, sigma)


# ---------------------------------------------------------------------------
# Picard iteration


class NonContractionError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class PicardResult:
    iterates: np.ndarray  # final iterate, (steps+1, 2K+1, 2K+1)
    differences: np.ndarray  # sup_t ||xi^{k+1} - xi^k||_p for k = 0, 1, ...
    converged: bool

    @property
    def ratios(self) -> np.ndarray:
        d = self.differences
        return d[1:] / d[:-1]

    @property
    def contraction_factor(self) -> float:
        r = self.ratios
        r = r[np.isfinite(r) & (r > 0)]
        return float(np.exp(np.mean(np.log(r)))) if r.size else 0.0


def duhamel_path(cfg: RunConfig, path_states: np.ndarray, st: Stepper | None = None) -> np.ndarray:
    """``J q_N`` of a whole path at every grid time, by the one-step recursion."""
    st = Stepper(cfg) if st is None else st
    out = np.zeros_like(path_states)
    forcing = st.drift(path_states[:-1])
    for m in range(cfg.steps):
        out[m + 1] = st.decay * out[m] + forcing[m]
    return out


def picard_solve(
    cfg: RunConfig,
    tol: float = 1e-12,
    max_iter: int = 50,
    sample: int = 0,
    raise_on_failure: bool = False,
) -> PicardResult:
    """Fixed-point iteration ``xi^{k+1} = S(t) xi_0 + z + J q_N(xi^k)`` on a frozen noise path.

    The discrete weights match ``run``, so the fixed point is the ``run`` trajectory.
    """
    st = Stepper(cfg)
    rng = make_generator(cfg.seed, sample)
    inc = rng.standard_normal((cfg.steps, st.scale.size)) * np.sqrt(cfg.dt)
    eta = st.eta(inc)
    K = cfg.K
    lin = np.empty((cfg.steps + 1, 2 * K + 1, 2 * K + 1), dtype=complex)
    lin[0] = initial_condition(cfg)
    z = np.zeros_like(lin[0])
    heat = lin[0].copy()
    for m in range(cfg.steps):
        heat = st.decay * heat
        z = st.decay * z + eta[m]
        lin[m + 1] = heat + z
    # heat and z advanced separately; their sum is the affine part
    xi = lin.copy()
    diffs = []
    converged = False
    for _ in range(max_iter):
        new = lin + duhamel_path(cfg, xi, st)
        d = float(np.max(st.lp_norm(new - xi)))
        diffs.append(d)
        xi = new
        if d < tol:
            converged = True
            break
    res = PicardResult(xi, np.array(diffs), converged)
    if not converged and raise_on_failure:
        raise NonContractionError(
            f"Picard iteration did not reach tol={tol} in {max_iter} iterations (observed factor "
            f"{res.contraction_factor:.3g}); T={cfg.T} is too long for N={cfg.N}"
        )
    return res


# ---------------------------------------------------------------------------
# a priori bound monitor


@dataclass(frozen=True)
class AprioriReport:
    sup_beta_p: float
    xi0_p: float
    sup_z: float
    C_p: float
    C1: float
    C2: float
    ratio: float
    violated: bool
    required_C_p: float


def _apriori_ratio(sup_beta_p, xi0_p, sup_z, T, p, C):
    C1 = C * T * sup_z ** (2 * p)
    C2 = C * T * (1.0 + sup_z**2)
    denom = (xi0_p + C1) * np.exp(C2)
    if denom == 0:
        return (np.inf if sup_beta_p > 0 else 0.0), C1, C2
    return sup_beta_p / denom, C1, C2


def apriori_from_norms(beta_lp: np.ndarray, z_lp: np.ndarray, T: float, p: float, C_p: float) -> AprioriReport:
    """Bound check from per-step ``||xi - z||_p`` and ``||z||_p`` of one run."""
    sup_beta_p = float(np.max(beta_lp) ** p)
    xi0_p = float(beta_lp[0] ** p)
    sup_z = float(np.max(z_lp))
    ratio, C1, C2 = _apriori_ratio(sup_beta_p, xi0_p, sup_z, T, p, C_p)

    def excess(c):
        return _apriori_ratio(sup_beta_p, xi0_p, sup_z, T, p, c)[0] - 1.0

    if excess(0.0) <= 0 or sup_beta_p == 0:
        required = 0.0
    else:
        hi = 1.0
        while excess(hi) > 0:
            hi *= 2.0
        required = float(brentq(excess, 0.0, hi, xtol=1e-14, rtol=1e-12))
    return AprioriReport(sup_beta_p, xi0_p, sup_z, C_p, C1, C2, float(ratio), bool(ratio > 1.0), required)


def apriori_monitor(traj: Trajectory, cfg: RunConfig | None = None, C_p: float = 1.0) -> AprioriReport:
    cfg = traj.cfg if cfg is None else cfg
    beta = synthesize(traj.states - traj.z_states, cfg.n)
    zg = synthesize(traj.z_states, cfg.n)
    return apriori_from_norms(grid_lp_norm(beta, cfg.p), grid_lp_norm(zg, cfg.p), cfg.T, cfg.p, C_p)
