"""Monte Carlo law of ``xi(t, x)``, kernel density estimation and absolute-continuity proxies.

The three diagnostics are falsifiable proxies, not proofs: an atom test, a
split-half two-sample Kolmogorov-Smirnov test and a local-mass scaling test.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from .solver import RunConfig, run_ensemble
from .spectral import point_values

KS_C_ALPHA = {0.05: 1.358, 0.01: 1.628, 0.001: 1.949}
LOCAL_MASS_FRACTIONS = (0.1, 0.05, 0.025)
LOCAL_MASS_MAX_RATIO = 1.5


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    values: np.ndarray
    meta: dict = field(default_factory=dict)


def ensemble(cfg: RunConfig, t: float | None = None, x=(np.pi, np.pi), samples: int = 1000) -> EnsembleResult:
    """Values of ``xi(t, x)`` over independent realizations ``0 .. samples-1``."""
    if samples < 2:
        raise ValueError("ensemble needs at least 2 samples")
    t = cfg.T / 2 if t is None else t
    m = int(round(t / cfg.dt))
    if abs(m * cfg.dt - t) > 1e-9 or not 0 <= m <= cfg.steps:
        raise ValueError(f"probe time t={t} must be a grid time in [0, T]")
    res = run_ensemble(cfg, range(samples), record=[m])
    vals = point_values(res.states[0], x)
    meta = {"cfg_hash": cfg.digest(), "t": float(t), "x": [float(x[0]), float(x[1])], "samples": int(samples)}
    return EnsembleResult(np.ascontiguousarray(vals), meta)


# ---------------------------------------------------------------------------
# kernel density estimate


@dataclass(frozen=True, eq=False)
class KDECurve:
    x: np.ndarray
    density: np.ndarray
    bandwidth: float

    def mass(self) -> float:
        return float(integrate.trapezoid(self.density, self.x))


@dataclass(frozen=True)
class AtomReport:
    value: float
    count: int


def silverman_bandwidth(values: np.ndarray) -> float:
    return 1.06 * float(np.std(values, ddof=1)) * len(values) ** (-0.2)


def kde(values, bandwidth: float | None = None, points: int = 512) -> KDECurve | AtomReport:
    """Gaussian KDE on ``points`` nodes over ``[min - 3h, max + 3h]``.

    Samples are sorted first so the curve does not depend on arrival order.
    """
    v = np.sort(np.asarray(values.values if isinstance(values, EnsembleResult) else values, dtype=float))
    if v.size < 2 or v[0] == v[-1]:
        return AtomReport(float(v[0]), int(v.size))
    h = silverman_bandwidth(v) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    grid = np.linspace(v[0] - 3 * h, v[-1] + 3 * h, points)
    est = stats.gaussian_kde(v, bw_method=h / float(np.std(v, ddof=1)))
    return KDECurve(grid, est(grid), h)


# ---------------------------------------------------------------------------
# diagnostics


def _splitmix64(bits: np.ndarray) -> np.ndarray:
    z = bits + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def hash_split(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split by a hash of each value's bit pattern, so the halves ignore sample order."""
    v = np.asarray(values, dtype=np.float64)
    with np.errstate(over="ignore"):
        h = _splitmix64(v.view(np.uint64))
    odd = (h & np.uint64(1)).astype(bool)
    return np.sort(v[~odd]), np.sort(v[odd])


def ks_threshold(n: int, m: int, alpha: float = 0.01) -> float:
    return KS_C_ALPHA[alpha] * np.sqrt((n + m) / (n * m))


def max_multiplicity(values: np.ndarray) -> int:
    _, counts = np.unique(np.asarray(values, dtype=float), return_counts=True)
    return int(counts.max())


def local_mass_table(values: np.ndarray, fractions=LOCAL_MASS_FRACTIONS) -> list[tuple[float, float]]:
    """``(h, max_c #{|xi - c| < h} / (2 h n))`` with ``c`` over the samples and ``h = f * sd``."""
    v = np.sort(np.asarray(values, dtype=float))
    sd = float(np.std(v, ddof=1))
    out = []
    for f in fractions:
        h = f * sd
        lo = np.searchsorted(v, v - h, side="right")
        hi = np.searchsorted(v, v + h, side="left")
        out.append((h, float(np.max(hi - lo)) / (2 * h * v.size)))
    return out


@dataclass(frozen=True)
class ContinuityReport:
    atom_max_multiplicity: int
    atom_expected_ties: float
    atom_pass: bool
    ks_stat: float
    ks_threshold: float
    ks_pass: bool
    local_mass_table: list
    local_mass_pass: bool

    @property
    def passed(self) -> bool:
        return self.atom_pass and self.ks_pass and self.local_mass_pass

    def to_dict(self) -> dict:
        return {
            "label": "empirical proxies for absolute continuity, not a proof",
            "atom_max_multiplicity": self.atom_max_multiplicity,
            "atom_expected_ties": self.atom_expected_ties,
            "atom_pass": self.atom_pass,
            "ks_stat": self.ks_stat,
            "ks_threshold": self.ks_threshold,
            "ks_pass": self.ks_pass,
            "local_mass_table": [{"h": h, "max_density": d} for h, d in self.local_mass_table],
            "local_mass_pass": self.local_mass_pass,
            "pass": self.passed,
        }


def continuity_diagnostics(values, alpha: float = 0.01) -> ContinuityReport:
    v = np.sort(np.asarray(values.values if isinstance(values, EnsembleResult) else values, dtype=float))
    n = v.size
    # expected tied pairs if values were continuous and resolved to ~1 ulp
    expected = n * (n - 1) / 2 * np.finfo(float).eps
    allowed = 1 + int(stats.poisson.ppf(1 - alpha, expected))
    mult = max_multiplicity(v)
    a, b = hash_split(v)
    if a.size == 0 or b.size == 0:
        ks, thr = 1.0, 0.0
    else:
        ks = float(stats.ks_2samp(a, b).statistic)
        thr = float(ks_threshold(a.size, b.size, alpha))
    if v[0] == v[-1]:
        table = [(f, float("inf")) for f in LOCAL_MASS_FRACTIONS]
        lm_pass = False
    else:
        table = local_mass_table(v)
        dens = [d for _, d in table]
        lm_pass = all(np.isfinite(dens)) and all(
            d2 <= LOCAL_MASS_MAX_RATIO * d1 for d1, d2 in zip(dens, dens[1:])
        )
    return ContinuityReport(mult, float(expected), mult <= allowed, ks, thr, ks < thr, table, bool(lm_pass))


def exact_gaussian_ks(values, variance: float) -> tuple[float, float]:
    """One-sample KS statistic and p-value against ``N(0, variance)``."""
    res = stats.kstest(np.sort(np.asarray(values, dtype=float)), stats.norm(0.0, np.sqrt(variance)).cdf)
    return float(res.statistic), float(res.pvalue)
