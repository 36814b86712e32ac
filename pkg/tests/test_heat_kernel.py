import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stochvort.heat_kernel import (
    KernelEvalSpec,
    apply_J,
    duhamel_coeffs,
    eval_fourier,
    eval_grad,
    eval_images,
    eval_kernel,
    fit_slope,
    kernel_lp_integral,
    kernel_target_slope,
    neg_divergence,
    phi_multiplier,
    semigroup_apply,
)
from stochvort.spectral import TWO_PI, SpectralField, random_field, synthesize


def test_frozen_values():
    # g(t, x, x) with t = 0.25 and the small-time Gaussian limit at t = 0.01
    assert float(eval_kernel(KernelEvalSpec(0.25), (1.0, 2.0), (1.0, 2.0))) == pytest.approx(0.3183, abs=1e-4)
    assert float(eval_kernel(KernelEvalSpec(0.01), (0.0, 0.0), (0.0, 0.0))) == pytest.approx(1 / (4 * np.pi * 0.01), rel=1e-12)


@given(st.floats(0.02, 1.0), st.tuples(*[st.floats(0, TWO_PI)] * 4))
def test_images_and_fourier_agree(t, pts):
    x, y = pts[:2], pts[2:]
    a = eval_fourier(KernelEvalSpec(t, 3, 60), x, y)
    b = eval_images(KernelEvalSpec(t, 3), x, y)
    assert abs(float(a - b)) < 1e-10


@given(st.floats(0.05, 1.0))
def test_kernel_has_unit_mass(t):
    n = 128
    h = TWO_PI / n
    y = (np.arange(n) + 0.5) * h
    Y1, Y2 = np.meshgrid(y, y, indexing="ij")
    g = eval_kernel(KernelEvalSpec(t), (1.0, 1.0), np.stack([Y1, Y2], axis=-1))
    assert np.sum(g) * h * h == pytest.approx(1.0, abs=1e-10)


def test_gradient_matches_finite_difference():
    spec = KernelEvalSpec(0.3)
    x, y = (1.0, 2.0), (2.5, 0.4)
    h = 1e-6
    g = eval_grad(spec, x, y)
    fd1 = (eval_kernel(spec, x, (y[0] + h, y[1])) - eval_kernel(spec, x, (y[0] - h, y[1]))) / (2 * h)
    fd2 = (eval_kernel(spec, x, (y[0], y[1] + h)) - eval_kernel(spec, x, (y[0], y[1] - h))) / (2 * h)
    np.testing.assert_allclose(np.ravel(g), [fd1, fd2], rtol=1e-6)


def test_kernel_symmetry_and_translation():
    spec = KernelEvalSpec(0.2)
    a = eval_kernel(spec, (0.3, 1.1), (2.0, 5.0))
    b = eval_kernel(spec, (2.0, 5.0), (0.3, 1.1))
    c = eval_kernel(spec, (1.3, 2.1), (3.0, 6.0))
    assert float(a) == pytest.approx(float(b), rel=1e-14)
    assert float(a) == pytest.approx(float(c), rel=1e-12)


def test_nonpositive_time_rejected():
    with pytest.raises(ValueError):
        KernelEvalSpec(0.0)


def test_semigroup_property(rng):
    f = random_field(6, rng)
    a = semigroup_apply(0.3, semigroup_apply(0.2, f))
    np.testing.assert_allclose(a.coeffs, semigroup_apply(0.5, f).coeffs, atol=1e-14)


def test_phi_multiplier_limits():
    phi = phi_multiplier(3, 0.1)
    assert phi[3, 3] == 0.1
    assert phi[4, 3] == pytest.approx(1 - np.exp(-0.1))


def test_duhamel_of_constant_forcing_is_exact(rng):
    # constant phi: J phi(t) = (1 - e^{-|k|^2 t}) / |k|^2 (-div phi) exactly
    K, dt, steps = 5, 0.01, 20
    v = np.stack([random_field(K, rng).coeffs, random_field(K, rng).coeffs])
    got = duhamel_coeffs(np.broadcast_to(v, (steps, 2) + v.shape[1:]), dt)
    want = phi_multiplier(K, steps * dt) * neg_divergence(v)
    np.testing.assert_allclose(got, want, atol=1e-13)
    assert apply_J(np.broadcast_to(v, (steps, 2) + v.shape[1:]), dt, 12).n == 12


def test_slopes_on_short_range():
    s = np.logspace(-3, -2, 4)
    for beta, grad in ((1.0, True), (1.5, False)):
        vals = [kernel_lp_integral(beta, si, grad) for si in s]
        assert fit_slope(s, vals) == pytest.approx(kernel_target_slope(beta, grad), abs=0.05)


def test_integrability_thresholds():
    with pytest.raises(ValueError, match="beta < 4/3"):
        kernel_lp_integral(1.4, 0.01, True)
    with pytest.raises(ValueError, match="beta < 2"):
        kernel_lp_integral(2.0, 0.01, False)


def test_synthesized_heat_flow_matches_kernel_convolution():
    # S(t) applied to sin(x1) is e^{-t} sin(x1)
    f = SpectralField.from_modes(4, {(1, 0): -1j * np.pi})
    g = synthesize(semigroup_apply(0.7, f).coeffs, 12)
    x = np.arange(12) * TWO_PI / 12
    np.testing.assert_allclose(g[:, 0], np.exp(-0.7) * np.sin(x), atol=1e-14)
