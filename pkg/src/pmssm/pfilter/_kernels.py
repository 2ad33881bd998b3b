"""Compiled inner loops of the filter.

Each kernel processes batch rows independently with a fixed sequential
summation order, so a row's result never depends on the batch it is in.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def systematic_rows(W, u):
    """Systematic resampling of each row of normalised weights ``W``.

    Particle ``i`` receives the grid points ``(u + j) / N`` that fall in
    ``[C_{i-1}, C_i)`` of the cumulative weights ``C``; the last particle
    also takes anything left over by rounding, as if ``C_N = 1``.
    """
    B, N = W.shape
    anc = np.empty((B, N), dtype=np.intp)
    for b in range(B):
        j = 0
        cum = 0.0
        ub = u[b]
        for i in range(N - 1):
            cum += W[b, i]
            while j < N and (ub + j) / N < cum:
                anc[b, j] = i
                j += 1
        while j < N:
            anc[b, j] = N - 1
            j += 1
    return anc


@njit(cache=True)
def gather_rows(a, idx):
    """``out[b, j] = a[b, idx[b, j]]`` for a ``(B, N, k)`` array."""
    B, N = idx.shape
    k = a.shape[2]
    out = np.empty((B, N, k))
    for b in range(B):
        for j in range(N):
            src = idx[b, j]
            for c in range(k):
                out[b, j, c] = a[b, src, c]
    return out
