import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import multivariate_normal

from pmssm.samplers.proposals import (
    arw_log_density,
    arw_propose,
    freeze,
    gradient_log_density,
    gradient_moments,
    gradient_propose,
    initial_proposal,
    regularize_information,
    robbins_monro_update,
)


def test_initial_defaults():
    p = initial_proposal(3)
    assert p.step_scale == pytest.approx(2.38 / np.sqrt(3))
    np.testing.assert_array_equal(p.empirical_cov, 0.01 * np.eye(3))
    with pytest.raises(ValueError):
        initial_proposal(2, kind="nuts")


def test_random_walk_density_is_symmetric_gaussian():
    p = initial_proposal(2, cov=np.array([[0.2, 0.05], [0.05, 0.1]]), step_scale=1.3)
    a, b = np.array([0.1, -0.4]), np.array([0.5, 0.2])
    assert arw_log_density(a, b, p) == pytest.approx(arw_log_density(b, a, p))
    expected = multivariate_normal(b, 1.3**2 * p.empirical_cov).logpdf(a)
    assert arw_log_density(a, b, p) == pytest.approx(expected)


def test_random_walk_draw_covariance():
    p = initial_proposal(2, cov=np.array([[0.2, 0.05], [0.05, 0.1]]), step_scale=1.0)
    rng = np.random.default_rng(0)
    draws = np.array([arw_propose(np.zeros(2), p, rng) for _ in range(20_000)])
    np.testing.assert_allclose(np.cov(draws.T), p.empirical_cov, rtol=0.05, atol=0.003)


def test_gradient_moments_formula():
    S = np.array([1.0, -2.0])
    H = np.array([[4.0, 1.0], [1.0, 3.0]])
    mean, cov = gradient_moments(np.zeros(2), S, H, scale=0.5)
    inv = np.linalg.inv(H)
    np.testing.assert_allclose(cov, 0.25 * inv)
    np.testing.assert_allclose(mean, 0.125 * inv @ S)


def test_gradient_proposal_density():
    S = np.array([0.3, 0.1])
    H = np.array([[2.0, 0.3], [0.3, 1.0]])
    rng = np.random.default_rng(1)
    th, logq = gradient_propose(np.zeros(2), S, H, rng)
    mean, cov = gradient_moments(np.zeros(2), S, H)
    assert logq == pytest.approx(multivariate_normal(mean, cov).logpdf(th))
    assert gradient_log_density(th, (mean, cov)) == pytest.approx(logq)


def test_regularisation_floors_eigenvalues():
    H = np.array([[1.0, 0.0], [0.0, -3.0]])
    R = regularize_information(H)
    w = np.linalg.eigvalsh(R)
    assert (w > 0).all()
    assert w.min() == pytest.approx(1e-6)
    assert regularize_information(-np.eye(2)) is None
    assert regularize_information(np.full((2, 2), np.nan)) is None


@given(st.lists(st.floats(-1e3, 1e3), min_size=4, max_size=4))
def test_regularised_information_is_positive_definite(vals):
    M = np.array(vals).reshape(2, 2)
    R = regularize_information(M)
    if R is not None:
        np.linalg.cholesky(R)
        assert np.allclose(R, R.T)


def test_unusable_information_raises():
    with pytest.raises(np.linalg.LinAlgError):
        gradient_propose(np.zeros(2), np.ones(2), -np.eye(2), np.random.default_rng(0))
    assert gradient_moments(np.zeros(2), None, np.eye(2)) is None


def test_robbins_monro_direction_and_gain():
    p = initial_proposal(1, step_scale=1.0)
    up = robbins_monro_update(p, 1.0)
    down = robbins_monro_update(p, 0.0)
    assert up.step_scale > 1.0 > down.step_scale
    # first gain is 1 / 10 ** 0.6
    assert np.log(up.step_scale) == pytest.approx((1 - 0.23) / 10**0.6)
    with pytest.raises(ValueError):
        robbins_monro_update(p, 1.5)


def test_robbins_monro_settles_at_target():
    p = initial_proposal(1, step_scale=1.0)
    rng = np.random.default_rng(3)
    for _ in range(20_000):
        # acceptance probability falls as the step grows
        alpha = float(np.exp(-p.step_scale))
        p = robbins_monro_update(p, alpha if rng.random() < 2 else 0.0)
    assert np.exp(-p.step_scale) == pytest.approx(0.23, abs=0.02)


def test_covariance_blends_initial_and_sample():
    p = initial_proposal(2)
    xs = np.random.default_rng(4).standard_normal((300, 2)) * [1.0, 2.0]
    for x in xs:
        p = robbins_monro_update(p, 0.23, x)
    scatter = np.cov(xs.T, bias=True) * 300
    expected = (100 * 0.01 * np.eye(2) + scatter) / 400
    np.testing.assert_allclose(p.empirical_cov, expected, rtol=1e-9)


def test_frozen_proposal_is_unchanged():
    p = freeze(initial_proposal(2))
    assert robbins_monro_update(p, 1.0, np.ones(2)) is p
