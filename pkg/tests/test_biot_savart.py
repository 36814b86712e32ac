import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stochvort.biot_savart import (
    TruncationSpec,
    curl_coeffs,
    field_lp_norm,
    lipschitz_probe,
    padded_size,
    product_coeffs,
    q_coeffs,
    q_tilde,
    q_truncated,
    theta,
    theta_prime,
    velocity,
    velocity_coeffs,
)
from stochvort.heat_kernel import neg_divergence
from stochvort.spectral import SpectralField, dealias_mask, grid_points, random_field, synthesize, wavenumbers

seeds = st.integers(0, 2**32 - 1)


@given(st.integers(2, 16), seeds)
def test_curl_inverts_biot_savart(K, seed):
    xi = random_field(K, np.random.default_rng(seed))
    np.testing.assert_allclose(curl_coeffs(velocity_coeffs(xi.coeffs)), xi.coeffs, atol=1e-12 * np.max(np.abs(xi.coeffs)))


@given(st.integers(2, 16), seeds)
def test_velocity_is_divergence_free(K, seed):
    v = velocity(random_field(K, np.random.default_rng(seed)))
    assert v.divergence_defect() <= 1e-15 * np.max(np.abs(v.coeffs))


def test_multiplier_orthogonal_in_integers():
    k1, k2 = wavenumbers(21)
    k1, k2 = k1.astype(np.int64), k2.astype(np.int64)
    assert np.all(k1 * k2 + k2 * (-k1) == 0)


def test_shear_flow():
    K, n = 5, 16
    v = velocity(SpectralField.from_modes(K, {(1, 0): -1j * np.pi}))
    X1, _ = grid_points(n)
    g = synthesize(v.coeffs, n)
    np.testing.assert_allclose(g[0], 0.0, atol=1e-14)
    np.testing.assert_allclose(g[1], -np.cos(X1), atol=1e-14)


def test_product_matches_direct_grid_product_for_low_modes(rng):
    # for band-K/3 inputs the product fits in band K, so the projection is exact
    K = 12
    a = random_field(K, rng, band=4).coeffs
    b = random_field(K, rng, band=4).coeffs
    vec = np.stack([a, b])
    got = product_coeffs(vec, b)
    n = 2 * K + 2
    direct = synthesize(vec, n) * synthesize(b, n)
    # the mean carries no flux divergence and is dropped
    direct -= direct.mean(axis=(-2, -1), keepdims=True)
    np.testing.assert_allclose(synthesize(got, n), direct, atol=1e-12)


@given(st.integers(3, 14), seeds)
def test_advection_neutral(K, seed):
    xi = np.where(dealias_mask(K), random_field(K, np.random.default_rng(seed)).coeffs, 0)
    d = neg_divergence(q_coeffs(xi))
    pair = np.sum(np.conj(d) * xi).real
    assert abs(pair) <= 1e-10 * np.sqrt(np.sum(np.abs(d) ** 2) * np.sum(np.abs(xi) ** 2))


def test_padded_size_examples():
    assert padded_size(21) == 64
    assert padded_size(8) == 26


@pytest.mark.parametrize(
    "s,want",
    [(0.0, 1.0), (5.0, 1.0), (5.5, 0.5), (6.0, 0.0), (9.0, 0.0)],
)
def test_theta_examples(s, want):
    assert theta(s, TruncationSpec(5.0)) == pytest.approx(want)


@given(st.floats(0, 10))
def test_theta_monotone_and_c1(s):
    spec = TruncationSpec(4.0)
    assert 0.0 <= theta(s, spec) <= 1.0
    assert theta_prime(s, spec) <= 0.0
    h = 1e-6
    if s > h:
        fd = (theta(s + h, spec) - theta(s - h, spec)) / (2 * h)
        assert fd == pytest.approx(theta_prime(s, spec), abs=1e-5)


def test_theta_rejects_negative_norm():
    with pytest.raises(ValueError):
        theta(-1.0, TruncationSpec(1.0))


def test_truncation_cuts_off_large_fields(rng):
    spec = TruncationSpec(2.0)
    xi = random_field(8, rng)
    big = xi * (10.0 / float(field_lp_norm(xi.coeffs, 32, spec.p)))
    assert np.all(q_truncated(big, spec, 32).coeffs == 0)
    small = xi * (1.0 / float(field_lp_norm(xi.coeffs, 32, spec.p)))
    np.testing.assert_array_equal(q_truncated(small, spec, 32).coeffs, q_coeffs(small.coeffs))
    assert q_tilde(small, spec, 32).coeffs.shape == (2, 17, 17)


def test_truncated_flux_is_lipschitz():
    assert np.isfinite(lipschitz_probe(TruncationSpec(3.0), 4, 0, K=8, n=32))
