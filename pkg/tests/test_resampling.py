import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import systematic_oracle
from pmssm.pfilter import ess, systematic_resample

weights = arrays(np.float64, st.integers(1, 40), elements=st.floats(0.0, 1.0)).filter(lambda w: w.sum() > 1e-3)


def normalise(w):
    w = np.asarray(w, dtype=np.float64)
    return w / w.sum()


@given(weights, st.floats(0.0, 1.0, exclude_max=True))
def test_matches_oracle(w, u):
    W = normalise(w)
    assert systematic_resample(W, u).tolist() == systematic_oracle(W, u)


@given(weights, st.floats(0.0, 1.0, exclude_max=True))
def test_counts_within_floor_and_ceiling(w, u):
    W = normalise(w)
    N = W.size
    counts = np.bincount(systematic_resample(W, u), minlength=N)
    assert counts.sum() == N
    # tolerate round-off only when N * W_i sits on an integer
    lo = np.floor(N * W - 1e-9)
    hi = np.ceil(N * W + 1e-9)
    assert ((counts >= lo) & (counts <= hi)).all()


@given(weights, st.floats(0.0, 1.0, exclude_max=True))
def test_indices_sorted_and_in_range(w, u):
    idx = systematic_resample(normalise(w), u)
    assert (np.diff(idx) >= 0).all()
    assert idx.min() >= 0 and idx.max() < w.size


def test_uniform_weights_keep_every_particle():
    assert systematic_resample(np.full(5, 0.2), 0.5).tolist() == [0, 1, 2, 3, 4]


def test_degenerate_weight():
    assert systematic_resample(np.array([0.0, 1.0, 0.0]), 0.3).tolist() == [1, 1, 1]


def test_invalid_inputs():
    with pytest.raises(ValueError):
        systematic_resample(np.array([0.5, 0.6]), 0.1)
    with pytest.raises(ValueError):
        systematic_resample(np.array([1.5, -0.5]), 0.1)
    with pytest.raises(ValueError):
        systematic_resample(np.array([0.5, 0.5]), 1.0)
    with pytest.raises(ValueError):
        systematic_resample(np.array([]), 0.1)


def test_ess():
    assert ess(np.full(4, 0.25)) == pytest.approx(4.0)
    assert ess(np.array([1.0, 0.0, 0.0])) == pytest.approx(1.0)
    assert ess(np.array([0.5, 0.5, 0.0])) == pytest.approx(2.0)
