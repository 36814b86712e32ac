"""Forward Jacobian of the discrete solution with respect to every noise coordinate.

A noise coordinate is a pair ``(j, m)``: real-basis direction ``j`` and timestep
``m``.  Its tangent ``Y = d xi / d dB[m, j]`` vanishes up to state ``m``, equals
``sigma_j f_j`` at state ``m+1`` and then follows the linearized step

    Y <- S Y + Phi P[-div(Theta (v(Y) xi + v(xi) Y) + Theta' chi(Y) q(xi))],
    chi(Y) = ||xi||_p^{1-p} int |xi|^{p-2} xi Y dx,

which is the derivative of the exponential-Euler map.  The discrete H_T norm is
``sum_{(j,m)} dt Y(t, x)^2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .biot_savart import padded_size, q_coeffs, theta, theta_prime, velocity_coeffs
from .heat_kernel import neg_divergence
from .noise import basis_coeffs, half_lattice, lattice_sum, mode_scale, trace_q
from .solver import RunConfig, Stepper, Trajectory
from .spectral import TWO_PI, analyze, point_values, synthesize

CHI_GUARD = 1e-8


@dataclass(frozen=True, eq=False)
class TangentEnsemble:
    """Tangents of the directions ``(j, m)`` recorded at state indices ``record``.

    ``fields[r, d]`` is the tangent of direction ``directions[d]`` at state
    ``record[r]``; ``linear[r, d]`` is the same tangent with the nonlinear
    terms removed (pure heat flow of the impulse).
    """

    cfg: RunConfig
    directions: np.ndarray
    record: np.ndarray
    fields: np.ndarray
    linear: np.ndarray

    def at(self, step_index: int) -> tuple[np.ndarray, np.ndarray]:
        r = np.flatnonzero(self.record == step_index)
        if r.size == 0:
            raise KeyError(f"state {step_index} was not recorded")
        return self.fields[r[0]], self.linear[r[0]]


def all_directions(cfg: RunConfig, upto: int | None = None) -> np.ndarray:
    """Every ``(j, m)`` with ``m < upto`` (default: all timesteps)."""
    upto = cfg.steps if upto is None else upto
    nd = 2 * len(half_lattice(cfg.K_w))
    jj, mm = np.meshgrid(np.arange(nd), np.arange(upto), indexing="ij")
    return np.stack([jj.ravel(), mm.ravel()], axis=1)


class Linearization:
    """Linearized exponential-Euler map around one stored state."""

    def __init__(self, st: Stepper, xi: np.ndarray):
        cfg = st.cfg
        self.st = st
        self.cfg = cfg
        self.n_pad = padded_size(cfg.K)
        self.active = cfg.nonlinear
        if not self.active:
            return
        s = float(st.lp_norm(xi))
        self.th = float(theta(s, st.trunc))
        self.thp = float(theta_prime(s, st.trunc))
        self.xi_pad = synthesize(xi, self.n_pad)
        self.v_pad = synthesize(velocity_coeffs(xi), self.n_pad)
        self.chi_weight = None
        if self.thp != 0.0 and s >= CHI_GUARD:
            p = cfg.p
            g = synthesize(xi, cfg.n)
            w = (TWO_PI / cfg.n) ** 2
            self.chi_weight = s ** (1.0 - p) * w * np.abs(g) ** (p - 2) * g
            self.q_xi = q_coeffs(xi)

    def apply(self, Y: np.ndarray) -> np.ndarray:
        st = self.st
        out = st.decay * Y
        if not self.active or (self.th == 0.0 and self.chi_weight is None):
            return out
        flux = np.zeros(Y.shape[:-2] + (2, Y.shape[-2], Y.shape[-1]), dtype=complex)
        if self.th != 0.0:
            y_pad = synthesize(Y, self.n_pad)
            vy_pad = synthesize(velocity_coeffs(Y), self.n_pad)
            prod = vy_pad * self.xi_pad + self.v_pad * y_pad[..., None, :, :]
            flux = flux + self.th * analyze(prod, self.cfg.K)
        if self.chi_weight is not None:
            chi = np.sum(synthesize(Y, self.cfg.n) * self.chi_weight, axis=(-2, -1))
            flux = flux + self.thp * chi[..., None, None, None] * self.q_xi
        return out + st.forcing * neg_divergence(flux)


def propagate_tangents(
    traj: Trajectory,
    directions: np.ndarray | None = None,
    record=None,
    chunk: int = 512,
) -> TangentEnsemble:
    """Propagate tangents of ``directions`` (rows ``(j, m)``) along a stored trajectory."""
    cfg = traj.cfg
    if traj.states.shape[0] != cfg.steps + 1:
        raise ValueError("trajectory must store every state to propagate tangents")
    directions = all_directions(cfg) if directions is None else np.asarray(directions, dtype=int).reshape(-1, 2)
    record = np.array([cfg.steps] if record is None else record, dtype=int)
    st = Stepper(cfg)
    K = cfg.K
    scale = mode_scale(cfg.noise_spec())
    order = np.argsort(directions[:, 1], kind="stable")
    dirs = directions[order]
    D = len(dirs)
    impulses = np.stack([scale[j] * basis_coeffs(K, cfg.K_w, j) for j in range(scale.size)])
    Y = np.zeros((D, 2 * K + 1, 2 * K + 1), dtype=complex)
    G = np.zeros_like(Y)
    fields = np.zeros((len(record), D) + Y.shape[1:], dtype=complex)
    lin = np.zeros_like(fields)
    starts = np.searchsorted(dirs[:, 1], np.arange(cfg.steps + 1), side="left")
    for step in range(cfg.steps + 1):
        # states index ``step``; directions with m == step - 1 are injected here
        if step > 0:
            lo, hi = starts[step - 1], starts[step]
            # advance those injected earlier
            if lo > 0:
                L = Linearization(st, traj.states[step - 1])
                for a in range(0, lo, chunk):
                    b = min(lo, a + chunk)
                    Y[a:b] = L.apply(Y[a:b])
                G[:lo] = st.decay * G[:lo]
            Y[lo:hi] = impulses[dirs[lo:hi, 0]]
            G[lo:hi] = Y[lo:hi]
        for r in np.flatnonzero(record == step):
            fields[r] = Y
            lin[r] = G
    inv = np.empty(D, dtype=int)
    inv[order] = np.arange(D)
    return TangentEnsemble(cfg, directions, record, fields[:, inv], lin[:, inv])


def tangent_point_values(fields: np.ndarray, x) -> np.ndarray:
    return point_values(fields, x)


def window_mask(directions: np.ndarray, step_index: int, dt: float, eps: float | None) -> np.ndarray:
    """Directions with ``m >= step_index - round(eps/dt)``; all directions when ``eps`` is None."""
    if eps is None:
        return np.ones(len(directions), dtype=bool)
    lo = step_index - int(round(eps / dt))
    return directions[:, 1] >= lo


def malliavin_norm(ens: TangentEnsemble, step_index: int, x, eps: float | None = None) -> float:
    """``sum dt Y(t, x)^2`` over active directions, optionally restricted to the final window ``eps``."""
    Y, _ = ens.at(step_index)
    vals = point_values(Y, x)
    mask = window_mask(ens.directions, step_index, ens.cfg.dt, eps)
    return float(ens.cfg.dt * np.sum(vals[mask] ** 2))


@dataclass(frozen=True)
class SplitReport:
    norm_sq: float
    window_norm_sq: float
    A_disc: float
    I_disc: float

    @property
    def holds(self) -> bool:
        return self.window_norm_sq >= 0.5 * self.A_disc - self.I_disc


def nondegeneracy_split(ens: TangentEnsemble, step_index: int, x, eps: float) -> SplitReport:
    """Discrete ``||D xi||^2 >= 1/2 A - I`` on the final window of length ``eps``."""
    Y, G = ens.at(step_index)
    return split_from_values(ens.directions, point_values(Y, x), point_values(G, x), step_index, ens.cfg.dt, eps)


def riemann_norm(b: float, K_w: int, t: float, dt: float) -> float:
    """Left-point Riemann sum ``sum_m dt sum_k |k|^{-2b} exp(-2|k|^2 (t - m dt)) / (2 pi)^2``."""
    steps = int(round(t / dt))
    m = np.arange(steps)
    return lattice_sum(K_w, b, lambda lam: np.sum(dt * np.exp(-2.0 * np.multiply.outer(lam, t - m * dt)), axis=-1)) / TWO_PI**2


def lower_bound_A(b: float, eps: float, t: float, T: float, K_w: int) -> tuple[float, float]:
    """``(A(eps), eps / ((2 pi)^2 (1 + 2T)))`` with ``A = (2pi)^{-2} sum |k|^{-2b-2} (1 - exp(-2|k|^2 eps)) / 2``."""
    if not b > 1:
        raise ValueError(f"nondegeneracy bound requires b > 1, got b={b}")
    if not 0 < eps < t:
        raise ValueError(f"window requires 0 < eps < t, got eps={eps}, t={t}")
    A = lattice_sum(K_w, b + 1, lambda lam: -np.expm1(-2.0 * lam * eps) / 2.0) / TWO_PI**2
    bound = eps / (TWO_PI**2 * (1.0 + 2.0 * T))
    return A, bound


def upper_bound_A(b: float, eps: float, K_w: int) -> float:
    """``eps Tr Q / (2 pi)^2``."""
    return eps * trace_q(b, K_w).value / TWO_PI**2


@dataclass(frozen=True)
class SmallBallReport:
    deltas: tuple[float, ...]
    frequencies: tuple[float, ...]
    monotone: bool


def small_ball_probe(norms, deltas) -> SmallBallReport:
    """Empirical ``P(||D xi||^2 < delta)`` along a ladder of ``delta`` values."""
    norms = np.asarray(norms, dtype=float)
    ds = sorted(float(d) for d in deltas)
    if any(d <= 0 for d in ds):
        raise ValueError("small-ball thresholds must be positive")
    freq = [float(np.mean(norms < d)) for d in ds]
    mono = all(a <= b for a, b in zip(freq, freq[1:]))
    return SmallBallReport(tuple(ds), tuple(freq), mono)


def point_tangents(traj: Trajectory, x, chunk: int = 2048) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(directions, Y(t, x), G(t, x))`` at the final state, propagated in direction chunks.

    Memory stays bounded by ``chunk`` tangent fields whatever the direction count.
    """
    dirs = all_directions(traj.cfg)
    yv = np.empty(len(dirs))
    gv = np.empty(len(dirs))
    for a in range(0, len(dirs), chunk):
        ens = propagate_tangents(traj, dirs[a : a + chunk], chunk=chunk)
        Y, G = ens.at(traj.cfg.steps)
        yv[a : a + chunk] = point_values(Y, x)
        gv[a : a + chunk] = point_values(G, x)
    return dirs, yv, gv


def split_from_values(directions: np.ndarray, yv: np.ndarray, gv: np.ndarray, step_index: int, dt: float, eps: float) -> SplitReport:
    mask = window_mask(directions, step_index, dt, eps)
    return SplitReport(
        norm_sq=float(dt * np.sum(yv**2)),
        window_norm_sq=float(dt * np.sum(yv[mask] ** 2)),
        A_disc=float(dt * np.sum(gv[mask] ** 2)),
        I_disc=float(dt * np.sum((yv[mask] - gv[mask]) ** 2)),
    )
