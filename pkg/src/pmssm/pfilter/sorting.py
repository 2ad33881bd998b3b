"""Orderings of particle clouds used before resampling.

Both functions return 0-based permutations: ``points[perm]`` is the
sorted cloud.
"""

from __future__ import annotations

import numpy as np


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
        raise ValueError("points must have shape (N, d) with N, d >= 1")
    if not np.isfinite(pts).all():
        raise ValueError("points must be finite")
    return pts


def euclidean_sort(points) -> np.ndarray:
    """Greedy nearest-neighbour chain.

    Starts at the point with the smallest first coordinate, then repeatedly
    moves to the closest unvisited point.  Ties go to the smaller index.
    """
    pts = _as_points(points)
    N, d = pts.shape
    if d == 1:
        # the greedy chain from the minimum visits points in ascending order
        return np.argsort(pts[:, 0], kind="stable")
    dist = np.zeros((N, N))
    for k in range(d):
        diff = pts[:, k, None] - pts[None, :, k]
        dist += diff * diff
    order = np.empty(N, dtype=np.intp)
    visited = np.zeros(N, dtype=bool)
    cur = int(np.argmin(pts[:, 0]))
    order[0] = cur
    visited[cur] = True
    for j in range(1, N):
        row = np.where(visited, np.inf, dist[cur])
        cur = int(np.argmin(row))
        order[j] = cur
        visited[cur] = True
    return order


def _grid_coords(pts: np.ndarray, order: int) -> np.ndarray:
    lo = pts.min(axis=0)
    span = pts.max(axis=0) - lo
    side = float(1 << order)
    out = np.zeros(pts.shape, dtype=np.uint64)
    for k in range(pts.shape[1]):
        if span[k] > 0:
            cell = np.floor((pts[:, k] - lo[k]) / span[k] * side)
            out[:, k] = np.clip(cell, 0, side - 1).astype(np.uint64)
    return out


def hilbert_transpose(X: np.ndarray, order: int) -> np.ndarray:
    """Skilling's axes-to-transpose map on integer grid coordinates ``(N, d)``."""
    X = np.array(X, dtype=np.uint64, copy=True)
    d = X.shape[1]
    one = np.uint64(1)
    Q = one << np.uint64(order - 1)
    while Q > one:
        P = Q - one
        for i in range(d):
            hit = (X[:, i] & Q) != 0
            X[hit, 0] ^= P
            miss = ~hit
            t = (X[miss, 0] ^ X[miss, i]) & P
            X[miss, 0] ^= t
            X[miss, i] ^= t
        Q >>= one
    for i in range(1, d):
        X[:, i] ^= X[:, i - 1]
    t = np.zeros(X.shape[0], dtype=np.uint64)
    Q = one << np.uint64(order - 1)
    while Q > one:
        hit = (X[:, d - 1] & Q) != 0
        t[hit] ^= Q - one
        Q >>= one
    for i in range(d):
        X[:, i] ^= t
    return X


def hilbert_keys(grid: np.ndarray, order: int) -> list[np.ndarray]:
    """Hilbert indices as big-endian lists of uint64 words (most significant first)."""
    X = hilbert_transpose(grid, order)
    d = X.shape[1]
    words = []
    cur = np.zeros(X.shape[0], dtype=np.uint64)
    used = 0
    for bit in range(order - 1, -1, -1):
        for i in range(d):
            cur = (cur << np.uint64(1)) | ((X[:, i] >> np.uint64(bit)) & np.uint64(1))
            used += 1
            if used == 64:
                words.append(cur)
                cur = np.zeros(X.shape[0], dtype=np.uint64)
                used = 0
    if used:
        words.append(cur)
    return words


def hilbert_sort(points, order: int = 16) -> np.ndarray:
    """Order points along a Hilbert curve on a ``2**order`` grid per axis.

    Each axis is min-max scaled; an axis with zero range maps to cell 0.
    Equal keys keep their original relative order.
    """
    pts = _as_points(points)
    order = int(order)
    if order < 1:
        raise ValueError("order must be >= 1")
    N, d = pts.shape
    if d == 1:
        return np.argsort(pts[:, 0], kind="stable")
    words = hilbert_keys(_grid_coords(pts, order), order)
    # lexsort: last key is primary; index last-resort tie-break comes first
    return np.lexsort([np.arange(N)] + words[::-1])
