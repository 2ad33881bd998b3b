"""Independent reference implementations used as test oracles.

Each one is written from the mathematical definition with plain Python or a
different numerical route than the package code it checks.
"""

from __future__ import annotations

import bisect
import itertools
import math

import numpy as np
from scipy.stats import multivariate_normal


def dense_gaussian_loglik(a: float, q: float, r: float, y) -> float:
    """Log density of the AR(1)-plus-noise observations as one joint Gaussian."""
    y = np.asarray(y, dtype=float).ravel()
    T = y.size
    var0 = q / (1.0 - a * a) if abs(a) < 1 else q
    # Cov(x_s, x_t) built by forward propagation of the state covariance
    cov = np.zeros((T, T))
    v = var0
    for t in range(T):
        if t > 0:
            v = a * a * v + q
        cov[t, t] = v
        for s in range(t + 1, T):
            cov[t, s] = cov[s, t] = a ** (s - t) * v
    cov += r * np.eye(T)
    return float(multivariate_normal(mean=np.zeros(T), cov=cov).logpdf(y))


def systematic_oracle(W, u: float) -> list[int]:
    """Ancestor of grid point ``(u + j) / N``: first index whose running sum exceeds it."""
    N = len(W)
    cum = list(itertools.accumulate(float(w) for w in W))
    out = []
    for j in range(N):
        point = (u + j) / N
        i = bisect.bisect_right(cum[: N - 1], point)
        out.append(min(i, N - 1))
    return out


def euclidean_sort_oracle(points) -> list[int]:
    """Greedy chain: start at the least first coordinate, then nearest unvisited."""
    pts = [tuple(float(v) for v in row) for row in np.atleast_2d(np.asarray(points, dtype=float))]
    remaining = list(range(len(pts)))
    start = min(remaining, key=lambda i: (pts[i][0], i))
    order = [start]
    remaining.remove(start)
    while remaining:
        cur = pts[order[-1]]
        nxt = min(remaining, key=lambda i: (math.dist(cur, pts[i]), i))
        order.append(nxt)
        remaining.remove(nxt)
    return order


def normal_cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def lyapunov_by_kronecker(F, Q):
    """Solve ``S = F S F' + Q`` through ``vec(S) = (I - F kron F)^-1 vec(Q)``."""
    n = F.shape[0]
    vec = np.linalg.solve(np.eye(n * n) - np.kron(F, F), Q.reshape(-1))
    return vec.reshape(n, n)


def ar1_chain(a: float, M: int, seed: int):
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(M)
    x = np.empty(M)
    x[0] = e[0] / math.sqrt(1 - a * a)
    for t in range(1, M):
        x[t] = a * x[t - 1] + e[t]
    return x


def importance_sampling_estimate(model, theta, y, store) -> float:
    """Likelihood estimate without resampling: average over particles of the
    product of observation densities along each particle's own path."""
    U = store.proposal_normals
    T, N, _ = U.shape
    total = np.zeros(N)
    x = None
    for t in range(1, T + 1):
        if t == 1:
            v = np.concatenate([U[0], store.initial_extra], axis=1)
            x = model.initial(theta, v)
        else:
            x = model.transition(theta, x, U[t - 1], t)
        total = total + model.log_obs(theta, x, np.atleast_1d(y[t - 1]), t)
    mx = total.max()
    return float(mx + math.log(np.mean(np.exp(total - mx))))
