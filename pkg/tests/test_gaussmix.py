import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import multivariate_normal

from rgpo_rfs.gaussmix import (GaussianComponent, Mixture, NumericalDomainError, batch_update,
                               gate_negative_bias, gaussian_logpdf, is_spd, linear_gaussian_update,
                               mixture_moments, reduce_mixture)


def random_spd(rng, d, scale=1.0):
    A = rng.standard_normal((d, d))
    return scale * (A @ A.T + d * np.eye(d))


def test_logpdf_matches_scipy():
    rng = np.random.default_rng(0)
    for d in (1, 2, 5):
        P = random_spd(rng, d)
        m, x = rng.standard_normal(d), rng.standard_normal(d)
        assert gaussian_logpdf(x, m, P) == pytest.approx(multivariate_normal(m, P).logpdf(x), rel=1e-12)


def test_logpdf_rejects_indefinite_cov():
    with pytest.raises(NumericalDomainError):
        gaussian_logpdf([0.0, 0.0], [0.0, 0.0], np.diag([1.0, -1.0]))


def test_scalar_kalman_update():
    prior = GaussianComponent(1.0, [2.0], [[4.0]])
    post, ll = linear_gaussian_update(prior, [[1.0]], [0.0], [[1.0]], [3.0])
    # gain 4/5
    assert post.mean[0] == pytest.approx(2.0 + 0.8 * 1.0, abs=1e-12)
    assert post.cov[0, 0] == pytest.approx(4.0 / 5.0, abs=1e-12)
    assert ll == pytest.approx(multivariate_normal(2.0, 5.0).logpdf(3.0), rel=1e-12)


def test_update_dimension_mismatch():
    prior = GaussianComponent(1.0, np.zeros(3), np.eye(3))
    with pytest.raises(ValueError, match="do not match"):
        linear_gaussian_update(prior, np.eye(2), np.zeros(2), np.eye(2), np.zeros(2))


def test_batch_update_matches_information_form():
    rng = np.random.default_rng(1)
    d, dz = 5, 2
    P = random_spd(rng, d)
    m = rng.standard_normal(d)
    B = rng.standard_normal((dz, d))
    off = rng.standard_normal(dz)
    D = random_spd(rng, dz, 0.5)
    z = rng.standard_normal(dz)
    m2, P2, ll = batch_update(m[None], P[None], B[None], off, D[None], z)
    Dinv = np.linalg.inv(D)
    Pi = np.linalg.inv(np.linalg.inv(P) + B.T @ Dinv @ B)
    mi = Pi @ (np.linalg.solve(P, m) + B.T @ Dinv @ (z - off))
    np.testing.assert_allclose(P2[0], Pi, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(m2[0], mi, rtol=1e-10, atol=1e-12)
    assert ll[0] == pytest.approx(multivariate_normal(B @ m + off, B @ P @ B.T + D).logpdf(z), rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_posterior_covariance_spd(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 6))
    P = random_spd(rng, d, 10.0 ** rng.uniform(-3, 3))
    H = rng.standard_normal((2, d))
    post, _ = linear_gaussian_update(GaussianComponent(1.0, np.zeros(d), P), H, np.zeros(2),
                                     np.eye(2) * 10.0 ** rng.uniform(-2, 2), rng.standard_normal(2))
    assert is_spd(post.cov)
    assert np.all(np.diag(post.cov) <= np.diag(P) * (1 + 1e-9))


def mixture_from_weights(w, d=2):
    w = np.asarray(w, dtype=float)
    return Mixture(np.log(w), np.arange(len(w) * d, dtype=float).reshape(len(w), d),
                   np.stack([np.eye(d)] * len(w)))


def test_reduce_prunes_caps_and_renormalizes():
    mix = mixture_from_weights([0.5, 0.3, 1e-7, 0.2 - 1e-7])
    out = reduce_mixture(mix, 1e-5, 2)
    assert len(out) == 2
    np.testing.assert_allclose(out.weights, [0.5 / 0.8, 0.3 / 0.8])
    np.testing.assert_array_equal(out.means, mix.means[[0, 1]])


def test_reduce_cap_ties_broken_by_position():
    out = reduce_mixture(mixture_from_weights([0.25] * 4), 1e-5, 3)
    np.testing.assert_array_equal(out.means[:, 0], [0.0, 2.0, 4.0])


def test_reduce_degenerate_keeps_argmax():
    mix = mixture_from_weights([1e-9, 3e-9, 2e-9])
    mix.log_weights = mix.log_weights - 50.0     # unnormalized, all tiny
    out = reduce_mixture(mix, 0.9, 10)
    assert len(out) == 1 and out.weights[0] == 1.0 and out.means[0, 0] == 2.0
    out = reduce_mixture(mixture_from_weights([0.3, 0.35, 0.35]), 0.5, 10)
    assert len(out) == 1 and out.weights[0] == 1.0 and out.means[0, 0] == 2.0


def test_reduce_rejects_bad_cap():
    with pytest.raises(ValueError):
        reduce_mixture(mixture_from_weights([1.0]), 1e-5, 0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-40, 0), min_size=1, max_size=30), st.integers(1, 10),
       st.sampled_from([0.0, 1e-5, 1e-2, 0.3]))
def test_reduce_weights_normalized(lw, cap, thr):
    mix = Mixture(np.array(lw), np.zeros((len(lw), 1)), np.ones((len(lw), 1, 1)))
    out = reduce_mixture(mix, thr, cap)
    assert 1 <= len(out) <= cap
    assert out.weights.sum() == pytest.approx(1.0, abs=1e-12)


def test_gate_negative_bias_zeroes_and_renormalizes():
    mix = Mixture(np.log([0.5, 0.25, 0.25]), np.array([[0.0, -1.0], [0.0, 2.0], [0.0, 3.0]]),
                  np.stack([np.eye(2)] * 3))
    out = gate_negative_bias(mix, [1])
    np.testing.assert_allclose(out.weights, [0.0, 0.5, 0.5])


def test_gate_negative_bias_all_negative_keeps_argmax():
    mix = Mixture(np.log([0.2, 0.8]), np.array([[0.0, -1.0], [0.0, -2.0]]), np.stack([np.eye(2)] * 2))
    out = gate_negative_bias(mix, [1])
    assert len(out) == 1 and out.means[0, 1] == -2.0 and out.weights[0] == 1.0


def test_mixture_moments_two_point():
    mix = Mixture(np.log([0.5, 0.5]), np.array([[-1.0], [1.0]]), np.stack([np.eye(1)] * 2))
    mean, cov = mixture_moments(mix)
    assert mean[0] == pytest.approx(0.0)
    assert cov[0, 0] == pytest.approx(2.0)


def test_mixture_validation():
    with pytest.raises(ValueError):
        Mixture(np.zeros(2), np.zeros((3, 2)), np.zeros((3, 2, 2)))
    with pytest.raises(ValueError):
        Mixture.from_components([GaussianComponent(1.0, [0.0], [[1.0]]),
                                 GaussianComponent(1.0, [0.0, 0.0], np.eye(2))])
    with pytest.raises(NumericalDomainError):
        Mixture(np.array([-np.inf]), np.zeros((1, 1)), np.ones((1, 1, 1))).normalized()


def test_is_spd():
    assert is_spd(np.eye(3))
    assert not is_spd(np.diag([1.0, 0.0]))
    assert not is_spd(np.array([[1.0, 0.5], [0.0, 1.0]]))
