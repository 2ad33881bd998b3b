import hashlib
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import kstest

from oracles import normal_cdf
from pmssm.rngstore import (
    BlockedStore,
    RandomNumberStore,
    block_update,
    child_seeds,
    choose_block,
    crn_update,
    draw_blocked,
    draw_store,
    normal_to_uniform,
)

shapes = st.tuples(st.integers(1, 4), st.integers(1, 5), st.integers(1, 3), st.integers(0, 2))


def digest(store):
    return hashlib.sha256(store.to_bytes()).hexdigest()


class TestDrawStore:
    def test_same_seed_gives_identical_single_value(self):
        a = draw_store(1, 1, 1, 7)
        b = draw_store(1, 1, 1, 7)
        assert a.proposal_normals.tobytes() == b.proposal_normals.tobytes()
        assert a.identical(b)

    def test_large_store_mean_within_clt_bound(self):
        s = draw_store(100, 50, 1, 1)
        assert abs(s.proposal_normals.mean()) < 0.06

    def test_seed_sensitivity(self):
        assert not draw_store(2, 2, 2, 1).identical(draw_store(2, 2, 2, 2))

    @pytest.mark.parametrize("dims", [(0, 1, 1), (1, 0, 1), (1, 1, 0)])
    def test_zero_dimension_rejected(self, dims):
        with pytest.raises(ValueError):
            draw_store(*dims, seed=1)

    @pytest.mark.parametrize("seed", [-1, 1.5, "x", True])
    def test_bad_seed_rejected(self, seed):
        with pytest.raises(ValueError):
            draw_store(1, 1, 1, seed)

    def test_shapes_and_immutability(self):
        s = draw_store(3, 4, 2, 0, n_extra=2)
        assert s.proposal_normals.shape == (3, 4, 2)
        assert s.resampling_normals.shape == (3,)
        assert s.initial_extra.shape == (4, 2)
        assert s.shape == (3, 4, 2, 2)
        with pytest.raises(ValueError):
            s.proposal_normals[0, 0, 0] = 1.0

    def test_non_finite_entries_rejected(self):
        with pytest.raises(ValueError):
            RandomNumberStore(np.full((1, 1, 1), np.nan), np.zeros(1), np.zeros((1, 0)))

    def test_inconsistent_dimensions_rejected(self):
        with pytest.raises(ValueError):
            RandomNumberStore(np.zeros((2, 1, 1)), np.zeros(3), np.zeros((1, 0)))

    @given(shapes, st.integers(0, 2**32))
    def test_reproducible_from_shape_and_seed(self, shape, seed):
        T, N, n_u, n_extra = shape
        assert draw_store(T, N, n_u, seed, n_extra).identical(draw_store(T, N, n_u, seed, n_extra))


class TestCrnUpdate:
    def test_rho_one_is_bit_identity(self):
        s = draw_store(10, 10, 1, 3)
        out = crn_update(s, 1.0, 99)
        assert out.identical(s)

    def test_rho_zero_is_uncorrelated(self):
        s = draw_store(100, 100, 1, 3)
        out = crn_update(s, 0.0, 4)
        r = np.corrcoef(s.proposal_normals.ravel(), out.proposal_normals.ravel())[0, 1]
        assert abs(r) < 0.04

    def test_high_rho_gives_matching_correlation(self):
        s = draw_store(100, 100, 1, 3)
        out = crn_update(s, 0.9999, 4)
        r = np.corrcoef(s.proposal_normals.ravel(), out.proposal_normals.ravel())[0, 1]
        assert abs(r - 0.9999) < 0.01

    def test_update_rule_is_applied_to_every_entry(self):
        s = draw_store(3, 4, 2, 5, n_extra=1)
        rho = 0.6
        fresh = draw_store(3, 4, 2, 8, n_extra=1)
        out = crn_update(s, rho, 8)
        c = np.sqrt(1 - rho**2)
        np.testing.assert_array_equal(out.proposal_normals, rho * s.proposal_normals + c * fresh.proposal_normals)
        np.testing.assert_array_equal(out.resampling_normals, rho * s.resampling_normals + c * fresh.resampling_normals)
        np.testing.assert_array_equal(out.initial_extra, rho * s.initial_extra + c * fresh.initial_extra)

    @pytest.mark.parametrize("rho", [-0.1, 1.1, np.nan])
    def test_rho_out_of_range(self, rho):
        with pytest.raises(ValueError):
            crn_update(draw_store(1, 1, 1, 0), rho, 1)

    @pytest.mark.parametrize("rho", [0.3, 0.9, 0.9999])
    def test_marginal_normality_ks(self, rho):
        crit = 1.628 / np.sqrt(10_000)  # 1% two-sided Kolmogorov critical value
        passes = 0
        n_seeds = 200
        for seed in range(n_seeds):
            s = draw_store(100, 100, 1, seed)
            out = crn_update(s, rho, 1000 + seed)
            stat = kstest(out.proposal_normals.ravel(), "norm").statistic
            passes += stat < crit
        assert passes >= 0.95 * n_seeds

    @given(shapes, st.integers(0, 1000))
    def test_rho_one_identity_property(self, shape, seed):
        s = draw_store(*shape[:3], seed, n_extra=shape[3])
        assert crn_update(s, 1.0, seed + 1).identical(s)

    @given(st.floats(0.0, 1.0))
    def test_output_finite_and_same_shape(self, rho):
        s = draw_store(2, 3, 1, 0)
        out = crn_update(s, rho, 1)
        assert out.shape == s.shape
        assert np.isfinite(out.flat()).all()


class TestBlockUpdate:
    def test_single_block_is_refreshed(self):
        b = draw_blocked(1, 3, 4, 1, 0)
        out = block_update(b, 0, 5)
        assert not out[0].identical(b[0])

    def test_only_chosen_block_changes(self):
        b = draw_blocked(12, 5, 6, 1, 0)
        out = block_update(b, 2, 77)
        for j in range(12):
            same = digest(out[j]) == digest(b[j])
            assert same == (j != 2)

    def test_uniform_block_choice(self):
        counts = np.bincount([choose_block(12, s) for s in child_seeds(123, 12_000)], minlength=12)
        assert ((counts >= 880) & (counts <= 1120)).all()

    @pytest.mark.parametrize("k", [-1, 12, 1.0])
    def test_block_index_out_of_range(self, k):
        with pytest.raises(ValueError):
            block_update(draw_blocked(12, 1, 1, 1, 0), k, 1)

    def test_blocks_must_share_shape(self):
        with pytest.raises(ValueError):
            BlockedStore((draw_store(1, 2, 1, 0), draw_store(1, 3, 1, 0)))

    @given(st.integers(1, 6), st.data())
    def test_exactly_one_block_changes_property(self, G, data):
        k = data.draw(st.integers(0, G - 1))
        b = draw_blocked(G, 2, 3, 1, data.draw(st.integers(0, 100)))
        out = block_update(b, k, data.draw(st.integers(101, 200)))
        changed = [not out[j].identical(b[j]) for j in range(G)]
        assert changed == [j == k for j in range(G)]

    def test_blocks_are_independent_draws(self):
        b = draw_blocked(3, 2, 2, 1, 0)
        assert not b[0].identical(b[1])
        assert b[0].identical(draw_store(2, 2, 1, child_seeds(0, 3)[0]))


class TestNormalToUniform:
    def test_zero_maps_to_half(self):
        assert normal_to_uniform(0.0) == 0.5

    def test_quantile_matches_erf_oracle(self):
        assert abs(normal_to_uniform(1.959964) - 0.975) < 1e-6
        for z in (-3.2, -0.4, 0.7, 2.5):
            assert normal_to_uniform(z) == pytest.approx(normal_cdf(z), abs=1e-14)

    def test_monotone(self):
        assert normal_to_uniform(-1.0) < normal_to_uniform(1.0)

    @pytest.mark.parametrize("z", [np.inf, -np.inf, np.nan])
    def test_non_finite_rejected(self, z):
        with pytest.raises(ValueError):
            normal_to_uniform(z)

    @given(st.floats(-1e6, 1e6))
    def test_strictly_inside_unit_interval(self, z):
        u = normal_to_uniform(z)
        assert 0.0 < u < 1.0


class TestBinaryFormat:
    def test_header_and_round_trip(self):
        s = draw_store(3, 2, 2, 9, n_extra=1)
        data = s.to_bytes()
        assert struct.unpack_from("<QQQQ", data, 0) == (3, 2, 2, 1)
        # time-major: first step's proposal normals come first, then its resampling normal
        first = np.frombuffer(data, dtype="<f8", count=5, offset=32)
        np.testing.assert_array_equal(first[:4], s.proposal_normals[0].ravel())
        assert first[4] == s.resampling_normals[0]
        assert RandomNumberStore.from_bytes(data).identical(s)

    def test_blocked_round_trip(self):
        b = draw_blocked(3, 2, 2, 1, 4)
        back = BlockedStore.from_bytes(b.to_bytes())
        assert all(x.identical(y) for x, y in zip(back, b))

    def test_truncated_payload(self):
        data = draw_store(2, 2, 1, 0).to_bytes()
        with pytest.raises(ValueError):
            RandomNumberStore.from_bytes(data[:-8])
