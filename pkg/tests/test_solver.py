import numpy as np
import pytest
import scipy.fft
from hypothesis import given
from hypothesis import strategies as st

from stochvort import solver
from stochvort.io import write_spectral_csv
from stochvort.noise import NoisePath
from stochvort.spectral import SpectralField, grid_points, random_field, synthesize

SMALL = solver.RunConfig(K=8, n=26, dt=0.01, T=0.2, noise_cutoff=4)


def test_defaults():
    cfg = solver.RunConfig()
    assert (cfg.K, cfg.n, cfg.p, cfg.N) == (21, 64, 6.0, 1e6)
    assert cfg.steps == 100 and cfg.K_w == 21


@pytest.mark.parametrize(
    "kw,match",
    [
        (dict(n=10), "n >= 2K\\+2"),
        (dict(dt=0.0), "dt > 0"),
        (dict(T=0.015), "multiple of dt"),
        (dict(b=-1.0), "b > 0"),
        (dict(noise_cutoff=30), "K_w <= K"),
        (dict(ic="vortex"), "unknown initial condition"),
    ],
)
def test_config_validation(kw, match):
    with pytest.raises(ValueError, match=match):
        solver.RunConfig(**kw)


def test_linear_noiseless_run_is_heat_flow():
    cfg = SMALL.with_(nonlinear=False, noise_amplitude=0.0, ic="random", ic_amplitude=2.0)
    tr = solver.run(cfg)
    k1, k2 = np.meshgrid(np.arange(-8, 9), np.arange(-8, 9), indexing="ij")
    want = tr.states[0] * np.exp(-(k1**2 + k2**2) * cfg.T)
    np.testing.assert_allclose(tr.states[-1], want, atol=1e-14)


def test_shear_is_steady_for_the_nonlinearity():
    # sin(x1) has v . grad xi = 0, so only diffusion acts
    cfg = SMALL.with_(ic="shear", ic_amplitude=3.0, noise_amplitude=0.0)
    tr = solver.run(cfg)
    X1, _ = grid_points(cfg.n)
    np.testing.assert_allclose(synthesize(tr.states[-1], cfg.n), 3.0 * np.exp(-cfg.T) * np.sin(X1), atol=1e-13)


def test_noise_only_matches_stochastic_convolution():
    cfg = SMALL.with_(nonlinear=False)
    tr = solver.run(cfg, sample=2)
    np.testing.assert_allclose(tr.states, tr.z_states, atol=1e-15)


def test_ensemble_reproduces_single_runs_bit_exactly():
    cfg = SMALL.with_(ic="sin_cos", noise_amplitude=2.0)
    ens = solver.run_ensemble(cfg, [0, 3, 5], record=[5, cfg.steps], chunk=2)
    for i, s in enumerate([0, 3, 5]):
        tr = solver.run(cfg, sample=s)
        np.testing.assert_array_equal(ens.states[0, i], tr.states[5])
        np.testing.assert_array_equal(ens.states[1, i], tr.states[-1])
        np.testing.assert_array_equal(ens.lp_norms[:, i], tr.lp_norms)
        np.testing.assert_array_equal(ens.l2_norms[:, i], tr.l2_norms)


def test_ensemble_is_bit_exact_inside_the_truncation_band():
    cfg = SMALL.with_(ic="random", ic_amplitude=3.5, N=3.0, noise_amplitude=2.0)
    ens = solver.run_ensemble(cfg, range(5), chunk=3)
    assert np.any((ens.lp_norms > cfg.N) & (ens.lp_norms < cfg.N + 1))
    for s in range(5):
        np.testing.assert_array_equal(ens.states[0, s], solver.run(cfg, sample=s).states[-1])


def test_prefix_property():
    cfg = SMALL.with_(ic="sin_cos", noise_amplitude=2.0)
    long = solver.run(cfg.with_(T=0.2), sample=1)
    short = solver.run(cfg.with_(T=0.1), sample=1)
    np.testing.assert_array_equal(short.states, long.states[:11])


def test_thread_count_does_not_change_results():
    cfg = SMALL.with_(ic="sin_cos", noise_amplitude=2.0)
    with scipy.fft.set_workers(1):
        a = solver.run(cfg).states
    with scipy.fft.set_workers(4):
        b = solver.run(cfg).states
    np.testing.assert_array_equal(a, b)


def test_single_step_function(rng):
    cfg = SMALL
    xi = random_field(cfg.K, rng)
    out = solver.step(xi, SpectralField.zeros(cfg.K), cfg)
    np.testing.assert_array_equal(out.coeffs, solver.Stepper(cfg).step(xi.coeffs, np.zeros_like(xi.coeffs)))
    with pytest.raises(ValueError):
        solver.step(xi, SpectralField.zeros(cfg.K - 1), cfg)


@given(st.floats(0.3, 3.0), st.floats(0.0, 2.0))
def test_first_hit_is_monotone_in_level(N, extra):
    norms = np.linspace(0.0, 6.0, 61)
    a = solver.first_hit(norms, N, 0.1)
    b = solver.first_hit(norms, N + extra, 0.1)
    assert a is not None and b is not None and a <= b


def test_truncation_hit_recorded():
    cfg = SMALL.with_(ic="random", ic_amplitude=3.0, N=1.0, noise_amplitude=0.0)
    tr = solver.run(cfg)
    assert tr.sigma_hit == 0.0
    assert solver.run(cfg.with_(N=1e6)).sigma_hit is None


def test_blowup_guard():
    with pytest.raises(solver.BlowUpError, match="sample 7"):
        solver._guard(np.full((2, 3, 3), np.nan), 0.5, [7, 8])


def test_explicit_path_and_short_path_rejected():
    cfg = SMALL
    tr = solver.run(cfg, sample=4)
    again = solver.run(cfg, path=tr.noise)
    np.testing.assert_array_equal(again.states, tr.states)
    with pytest.raises(ValueError):
        solver.run(cfg, path=NoisePath(tr.noise.increments[:3], cfg.dt))


def test_initial_condition_from_csv(tmp_path, rng):
    f = random_field(5, rng)
    path = tmp_path / "ic.csv"
    write_spectral_csv(path, f)
    xi0 = solver.initial_condition(SMALL.with_(ic=str(path)))
    np.testing.assert_array_equal(xi0[3:14, 3:14], f.coeffs)


def test_random_initial_condition_has_requested_norm():
    cfg = SMALL.with_(ic="random", ic_amplitude=2.5)
    assert float(solver.Stepper(cfg).lp_norm(solver.initial_condition(cfg))) == pytest.approx(2.5)


def test_picard_fixed_point_is_the_run():
    cfg = SMALL.with_(T=0.05, dt=0.005, N=5.0, ic="random", ic_amplitude=4.0, noise_amplitude=2.0)
    res = solver.picard_solve(cfg, tol=1e-13)
    assert res.converged
    assert np.all(res.ratios[res.differences[1:] > 1e-13] < 1)
    tr = solver.run(cfg)
    assert np.max(np.abs(res.iterates - tr.states)) < 1e-12 * np.max(np.abs(tr.states))


def test_picard_failure_is_reported():
    cfg = SMALL.with_(ic="random", ic_amplitude=4.0, N=5.0)
    with pytest.raises(solver.NonContractionError):
        solver.picard_solve(cfg, tol=1e-30, max_iter=2, raise_on_failure=True)


def test_apriori_required_constant_is_tight():
    beta = np.array([1.0, 1.4, 1.2])
    z = np.array([0.0, 0.5, 0.7])
    rep = solver.apriori_from_norms(beta, z, 1.0, 6.0, 1.0)
    tight = solver.apriori_from_norms(beta, z, 1.0, 6.0, rep.required_C_p)
    assert tight.ratio == pytest.approx(1.0, rel=1e-9)
    assert solver.apriori_from_norms(beta, z, 1.0, 6.0, 2 * rep.required_C_p).violated is False


def test_apriori_monitor_on_a_run():
    cfg = SMALL.with_(noise_amplitude=3.0)
    rep = solver.apriori_monitor(solver.run(cfg), C_p=0.0)
    assert rep.required_C_p > 0 and rep.violated
