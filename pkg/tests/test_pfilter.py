import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import importance_sampling_estimate
from pmssm.errors import EstimateCollapsed, UnsupportedOperation
from pmssm.models import Growth, LinearGaussian, LotkaVolterra, Spline, StochasticVolatility, kalman_loglik, simulate
from pmssm.pfilter import PFConfig, estimate_score_hessian, run_pf, run_pf_batch, run_pf_conventional
from pmssm.rngstore import child_seeds, crn_update, draw_store


@pytest.fixture(scope="module")
def lg_setup():
    m = LinearGaussian()
    th = m.unconstrain({"a": 0.7, "q": 0.5, "r": 1.0})
    _, y = simulate(m, th, 30, 1)
    return m, th, y


@pytest.fixture(scope="module")
def sv4_setup():
    m = StochasticVolatility(4)
    th = m.unconstrain({"phi": 0.98, "tau2": 0.1})
    _, y = simulate(m, th, 60, 2)
    return m, th, y


def store_for(m, T, N, seed):
    return draw_store(T, N, m.n_u, seed, n_extra=m.n_extra)


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [dict(N=0), dict(N=5, resample_every=0), dict(N=5, sort="bogus"), dict(N=5, sort_space="x"),
         dict(N=5, lam=1.5), dict(N=5, resample_threshold=6.0), dict(N=5, hilbert_order=0)],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            PFConfig(**kwargs)

    def test_ess_trigger_only_without_sorting(self):
        assert PFConfig(5, resample_threshold=2.0).ess_triggered
        assert not PFConfig(5, resample_threshold=2.0, sort="hilbert").ess_triggered


def test_large_n_close_to_kalman(lg_setup):
    m, th, y = lg_setup
    ll = run_pf(m, th, y, store_for(m, 30, 20_000, 0), PFConfig(20_000)).log_lik
    # Monte Carlo SD of the log estimate is about 0.04 at this N
    assert ll == pytest.approx(kalman_loglik(th, y), abs=0.15)


def test_without_resampling_equals_importance_sampling(lg_setup):
    m, th, y = lg_setup
    store = store_for(m, 30, 50, 3)
    res = run_pf(m, th, y, store, PFConfig(50, resample_every=1000))
    assert res.log_lik == pytest.approx(importance_sampling_estimate(m, th, y, store), rel=1e-12)
    assert (res.ancestry == np.arange(50)).all()


def test_sv_without_resampling_equals_importance_sampling(sv4_setup):
    m, th, y = sv4_setup
    store = store_for(m, 60, 20, 4)
    res = run_pf(m, th, y, store, PFConfig(20, resample_every=10_000))
    assert res.log_lik == pytest.approx(importance_sampling_estimate(m, th, y, store), rel=1e-12)


def test_log_likelihood_is_sum_of_step_ratios(sv4_setup):
    m, th, y = sv4_setup
    res = run_pf(m, th, y, store_for(m, 60, 30, 0), PFConfig(30))
    assert res.log_lik == pytest.approx(res.per_step_log_ratio.sum(), rel=0, abs=0)
    assert res.final_weights.sum() == pytest.approx(1.0)
    assert res.ancestry.shape == (60, 30)
    assert res.final_particles.shape == (30, 4)


def test_first_step_ratio_is_plain_average(lg_setup):
    m, th, y = lg_setup
    store = store_for(m, 30, 40, 6)
    res = run_pf(m, th, y, store, PFConfig(40))
    x1 = m.initial(th, store.proposal_normals[0])
    expected = math.log(np.mean(np.exp(m.log_obs(th, x1, y[0], 1))))
    assert res.per_step_log_ratio[0] == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("P", [2, 4])
def test_disturbance_and_state_filters_agree_pathwise(P):
    m = StochasticVolatility(P)
    th = m.unconstrain({"phi": 0.9, "tau2": 0.2})
    _, y = simulate(m, th, 80, P)
    store = store_for(m, 80, 40, 1)
    cfg = PFConfig(40)
    a = run_pf(m, th, y, store, cfg).log_lik
    b = run_pf_conventional(m, th, y, store, cfg).log_lik
    assert abs(a - b) < 1e-9


@pytest.mark.parametrize("sort", ["none", "euclidean", "hilbert"])
def test_identical_store_gives_identical_estimate(sv4_setup, sort):
    m, th, y = sv4_setup
    store = store_for(m, 60, 25, 9)
    cfg = PFConfig(25, sort=sort, sort_space="state")
    a = run_pf_conventional(m, th, y, store, cfg)
    b = run_pf_conventional(m, th, y, crn_update(store, 1.0, 5), cfg)
    assert a.log_lik == b.log_lik


@given(st.integers(1, 5), st.sampled_from(["none", "euclidean", "hilbert"]), st.sampled_from(["disturbance", "state"]),
       st.integers(1, 3))
def test_batch_rows_match_single_runs(B, sort, space, resample_every):
    m = Spline(delta=0.05)
    th = m.unconstrain({"tau2": 2.0, "sigma2": 0.3})
    _, y = simulate(m, th, 12, 0)
    cfg = PFConfig(15, sort=sort, sort_space=space, resample_every=resample_every, compute_derivatives=True)
    stores = [store_for(m, 12, 15, s) for s in child_seeds(B, B)]
    batch = run_pf_batch(m, th, y, stores, cfg)
    for b, s in enumerate(stores):
        one = run_pf_batch(m, th, y, [s], cfg)
        assert batch.log_lik[b].tobytes() == one.log_lik[0].tobytes()
        assert batch.score[b].tobytes() == one.score[0].tobytes()
        assert batch.neg_hessian[b].tobytes() == one.neg_hessian[0].tobytes()
        assert batch.ancestry[b].tobytes() == one.ancestry[0].tobytes()


def test_ess_triggered_resampling(lg_setup):
    m, th, y = lg_setup
    store = store_for(m, 30, 60, 2)
    never = run_pf(m, th, y, store, PFConfig(60, resample_threshold=1e-9))
    assert (never.ancestry == np.arange(60)).all()
    always = run_pf(m, th, y, store, PFConfig(60, resample_threshold=60.0))
    fixed = run_pf(m, th, y, store, PFConfig(60))
    assert always.log_lik == fixed.log_lik


def test_fixed_resampling_frequency(lg_setup):
    m, th, y = lg_setup
    res = run_pf(m, th, y, store_for(m, 30, 20, 1), PFConfig(20, resample_every=3))
    ident = np.all(res.ancestry == np.arange(20), axis=1)
    # ancestry[t] records the parents of step t + 1; resampling happens after steps 3, 6, ...
    for t in range(1, 30):
        if t % 3 != 0:
            assert ident[t]


def test_collapse_raises_with_time_index():
    m = Growth()
    th = m.unconstrain({"tau2": 1.0, "sigma2": 1e-4})
    y = np.array([[0.0], [0.0], [1e300]])  # squared residual overflows
    store = draw_store(3, 10, 1, 0)
    with pytest.raises(EstimateCollapsed) as info:
        run_pf(m, th, y, store, PFConfig(10))
    assert info.value.t == 3
    batch = run_pf_batch(m, th, y, [store, store], PFConfig(10))
    assert (batch.collapsed_at == 3).all() and (batch.log_lik == -np.inf).all()


def test_input_validation(lg_setup):
    m, th, y = lg_setup
    with pytest.raises(ValueError):
        run_pf(m, th, y, store_for(m, 29, 10, 0), PFConfig(10))
    with pytest.raises(ValueError):
        run_pf(m, th[:2], y, store_for(m, 30, 10, 0), PFConfig(10))
    with pytest.raises(ValueError):
        run_pf_batch(m, th, y, [], PFConfig(10))
    lv = LotkaVolterra()
    th_lv = lv.unconstrain({"c1": 0.5, "c2": 0.0025, "c3": 0.3, "sigma2": 0.5})
    with pytest.raises(UnsupportedOperation):
        estimate_score_hessian(lv, th_lv, np.ones((2, 2)), draw_store(2, 5, 1, 0), PFConfig(5))


def test_lotka_volterra_filter_runs():
    m = LotkaVolterra()
    th = m.unconstrain({"c1": 0.5, "c2": 0.0025, "c3": 0.3, "sigma2": 0.5})
    _, y = simulate(m, th, 5, 1)
    store = draw_store(5, 30, 1, 1)
    a = run_pf(m, th, y, store, PFConfig(30)).log_lik
    assert np.isfinite(a)
    assert a == run_pf(m, th, y, store, PFConfig(30)).log_lik


def test_score_close_to_exact_gradient(lg_setup):
    m, _, y = lg_setup
    th = m.unconstrain({"a": 0.5, "q": 1.0, "r": 0.8})
    h = 1e-5
    exact = np.array([(kalman_loglik(th + h * e, y) - kalman_loglik(th - h * e, y)) / (2 * h) for e in np.eye(3)])
    stores = [store_for(m, 30, 2000, s) for s in range(10)]
    res = run_pf_batch(m, th, y, stores, PFConfig(2000, compute_derivatives=True))
    np.testing.assert_allclose(res.score.mean(axis=0), exact, rtol=0.1, atol=0.15)
    info = res.neg_hessian.mean(axis=0)
    assert np.allclose(info, info.T)
    assert np.linalg.eigvalsh(info).max() > 0


def test_derivatives_are_zero_free_for_single_step():
    # one observation: the score is the weighted average of complete-data scores
    m = LinearGaussian()
    th = m.unconstrain({"a": 0.5, "q": 1.0, "r": 0.8})
    y = np.array([[0.4]])
    store = draw_store(1, 5000, 1, 3)
    S, Sigma = estimate_score_hessian(m, th, y, store, PFConfig(5000))
    h = 1e-5
    exact = np.array([(kalman_loglik(th + h * e, y) - kalman_loglik(th - h * e, y)) / (2 * h) for e in np.eye(3)])
    np.testing.assert_allclose(S, exact, atol=0.05)
    assert Sigma.shape == (3, 3)
