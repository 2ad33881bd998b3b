"""Storage and update rules for the auxiliary randomness of a particle filter.

Every random number a filter consumes is kept as a standard normal in a
fixed, time-major layout, so that a likelihood estimate is a deterministic
function of ``(theta, store)``.  Correlated proposals for the store follow
the autoregressive rule ``rho * old + sqrt(1 - rho**2) * fresh``; block
proposals replace one independent store out of ``G``.

Stores are immutable: every update returns a new object.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.special import ndtr

SeedLike = Union[int, np.random.SeedSequence]

_HEADER = struct.Struct("<QQQQ")
_BLOCK_HEADER = struct.Struct("<Q")
# Largest double strictly below 1 and smallest normal double above 0.
_U_LO = np.finfo(np.float64).tiny
_U_HI = np.nextafter(1.0, 0.0)


def _rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (int, np.integer)):
        raise ValueError(f"seed must be an integer or SeedSequence, got {seed!r}")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return np.random.default_rng(int(seed))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RandomNumberStore:
    """All standard normals consumed by one particle-filter pass.

    Attributes
    ----------
    proposal_normals : ndarray, shape (T, N, n_u)
        Disturbance draws, one ``n_u``-vector per particle per time step.
    resampling_normals : ndarray, shape (T,)
        One normal per time step; mapped to a uniform with the standard
        normal CDF when the filter resamples at that step.
    initial_extra : ndarray, shape (N, n_extra)
        Additional normals needed by models whose initial-state map takes
        more than ``n_u`` inputs (``n_extra`` is 0 for most models).
    """

    proposal_normals: np.ndarray
    resampling_normals: np.ndarray
    initial_extra: np.ndarray

    def __post_init__(self):
        p = _frozen(self.proposal_normals)
        r = _frozen(self.resampling_normals)
        e = _frozen(self.initial_extra)
        if p.ndim != 3 or r.ndim != 1 or e.ndim != 2:
            raise ValueError("store arrays must have shapes (T,N,n_u), (T,), (N,n_extra)")
        if r.shape[0] != p.shape[0] or e.shape[0] != p.shape[1]:
            raise ValueError("inconsistent store dimensions")
        if min(p.shape) < 1:
            raise ValueError("store dimensions must be >= 1")
        if not (np.isfinite(p).all() and np.isfinite(r).all() and np.isfinite(e).all()):
            raise ValueError("store entries must be finite")
        object.__setattr__(self, "proposal_normals", p)
        object.__setattr__(self, "resampling_normals", r)
        object.__setattr__(self, "initial_extra", e)

    @property
    def T(self) -> int:
        return self.proposal_normals.shape[0]

    @property
    def N(self) -> int:
        return self.proposal_normals.shape[1]

    @property
    def n_u(self) -> int:
        return self.proposal_normals.shape[2]

    @property
    def n_extra(self) -> int:
        return self.initial_extra.shape[1]

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (self.T, self.N, self.n_u, self.n_extra)

    @property
    def size(self) -> int:
        return self.proposal_normals.size + self.resampling_normals.size + self.initial_extra.size

    def flat(self) -> np.ndarray:
        """All entries as one vector (proposal, resampling, extra)."""
        return np.concatenate(
            [self.proposal_normals.ravel(), self.resampling_normals, self.initial_extra.ravel()]
        )

    def identical(self, other: "RandomNumberStore") -> bool:
        """Bitwise equality of every entry."""
        return self.shape == other.shape and all(
            a.tobytes() == b.tobytes()
            for a, b in zip(self._arrays(), other._arrays())
        )

    def _arrays(self):
        return (self.proposal_normals, self.resampling_normals, self.initial_extra)

    # -- binary checkpoint format -------------------------------------------------
    def to_bytes(self) -> bytes:
        """Little-endian dump: header (T, N, n_u, n_extra) then time-major payload.

        For each time step the ``N * n_u`` proposal normals are followed by
        that step's resampling normal; the ``N * n_extra`` initial extras
        come last.
        """
        T, N, n_u, n_extra = self.shape
        body = np.empty((T, N * n_u + 1), dtype="<f8")
        body[:, :-1] = self.proposal_normals.reshape(T, N * n_u)
        body[:, -1] = self.resampling_normals
        return (
            _HEADER.pack(T, N, n_u, n_extra)
            + body.tobytes()
            + self.initial_extra.astype("<f8").tobytes()
        )

    @classmethod
    def from_bytes(cls, data: bytes, offset: int = 0) -> "RandomNumberStore":
        store, _ = cls._read(data, offset)
        return store

    @classmethod
    def _read(cls, data: bytes, offset: int):
        if len(data) - offset < _HEADER.size:
            raise ValueError("truncated store header")
        T, N, n_u, n_extra = _HEADER.unpack_from(data, offset)
        offset += _HEADER.size
        n_body = T * (N * n_u + 1)
        n_total = n_body + N * n_extra
        if len(data) - offset < 8 * n_total:
            raise ValueError("truncated store payload")
        vals = np.frombuffer(data, dtype="<f8", count=n_total, offset=offset).astype(np.float64)
        body = vals[:n_body].reshape(T, N * n_u + 1)
        store = cls(
            proposal_normals=body[:, :-1].reshape(T, N, n_u),
            resampling_normals=body[:, -1],
            initial_extra=vals[n_body:].reshape(N, n_extra),
        )
        return store, offset + 8 * n_total


@dataclass(frozen=True, eq=False)
class BlockedStore:
    """``G`` independent stores, one per particle filter in the averaged estimator."""

    blocks: tuple[RandomNumberStore, ...]

    def __post_init__(self):
        blocks = tuple(self.blocks)
        if not blocks:
            raise ValueError("a blocked store needs at least one block")
        shape = blocks[0].shape
        if any(b.shape != shape for b in blocks):
            raise ValueError("all blocks must share the same (T, N, n_u, n_extra)")
        object.__setattr__(self, "blocks", blocks)

    @property
    def G(self) -> int:
        return len(self.blocks)

    def __len__(self) -> int:
        return len(self.blocks)

    def __getitem__(self, k: int) -> RandomNumberStore:
        return self.blocks[k]

    def __iter__(self):
        return iter(self.blocks)

    def to_bytes(self) -> bytes:
        return _BLOCK_HEADER.pack(self.G) + b"".join(b.to_bytes() for b in self.blocks)

    @classmethod
    def from_bytes(cls, data: bytes) -> "BlockedStore":
        (G,) = _BLOCK_HEADER.unpack_from(data, 0)
        offset = _BLOCK_HEADER.size
        blocks = []
        for _ in range(G):
            store, offset = RandomNumberStore._read(data, offset)
            blocks.append(store)
        return cls(tuple(blocks))


def draw_store(T: int, N: int, n_u: int, seed: SeedLike, n_extra: int = 0) -> RandomNumberStore:
    """Draw a store of iid standard normals.

    The same ``(T, N, n_u, n_extra, seed)`` always yields a bit-identical store.
    """
    for name, v in (("T", T), ("N", N), ("n_u", n_u)):
        if int(v) < 1:
            raise ValueError(f"{name} must be >= 1, got {v}")
    if int(n_extra) < 0:
        raise ValueError("n_extra must be >= 0")
    rng = _rng(seed)
    T, N, n_u, n_extra = int(T), int(N), int(n_u), int(n_extra)
    return RandomNumberStore(
        proposal_normals=rng.standard_normal((T, N, n_u)),
        resampling_normals=rng.standard_normal(T),
        initial_extra=rng.standard_normal((N, n_extra)),
    )


def draw_like(store: RandomNumberStore, seed: SeedLike) -> RandomNumberStore:
    """Fresh store with the same shape as ``store``."""
    T, N, n_u, n_extra = store.shape
    return draw_store(T, N, n_u, seed, n_extra=n_extra)


def child_seeds(seed: SeedLike, n: int) -> list[np.random.SeedSequence]:
    """The first ``n`` children of ``seed``, independent of any earlier spawning."""
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    elif isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ValueError(f"seed must be a non-negative integer or SeedSequence, got {seed!r}")
    else:
        ss = np.random.SeedSequence(int(seed))
    return [
        np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (i,), pool_size=ss.pool_size)
        for i in range(int(n))
    ]


def draw_blocked(G: int, T: int, N: int, n_u: int, seed: SeedLike, n_extra: int = 0) -> BlockedStore:
    """``G`` independent stores seeded from the first ``G`` children of ``seed``."""
    if int(G) < 1:
        raise ValueError("G must be >= 1")
    return BlockedStore(tuple(draw_store(T, N, n_u, child, n_extra) for child in child_seeds(seed, G)))


def crn_update(store: RandomNumberStore, rho: float, seed: SeedLike) -> RandomNumberStore:
    """Correlated refresh ``rho * U + sqrt(1 - rho**2) * xi`` of every entry.

    ``rho = 1`` returns the store unchanged; ``rho = 0`` returns an
    independent draw.  Resampling normals and initial extras are updated by
    the same rule as the disturbance normals.
    """
    rho = float(rho)
    if not (0.0 <= rho <= 1.0):
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    if rho == 1.0:
        return store
    fresh = draw_like(store, seed)
    if rho == 0.0:
        return fresh
    s = np.sqrt(1.0 - rho * rho)
    return RandomNumberStore(
        proposal_normals=rho * store.proposal_normals + s * fresh.proposal_normals,
        resampling_normals=rho * store.resampling_normals + s * fresh.resampling_normals,
        initial_extra=rho * store.initial_extra + s * fresh.initial_extra,
    )


def block_update(blocked: BlockedStore, k: int, seed: SeedLike) -> BlockedStore:
    """Replace block ``k`` (0-based) with a fresh draw; other blocks are shared as-is."""
    if isinstance(k, (bool, np.bool_)) or not isinstance(k, (int, np.integer)):
        raise ValueError(f"block index must be an integer, got {k!r}")
    if not (0 <= k < blocked.G):
        raise ValueError(f"block index {k} out of range for G={blocked.G}")
    blocks = list(blocked.blocks)
    blocks[k] = draw_like(blocks[k], seed)
    return BlockedStore(tuple(blocks))


def choose_block(G: int, seed: SeedLike) -> int:
    """Uniform block index on ``0..G-1``."""
    if int(G) < 1:
        raise ValueError("G must be >= 1")
    return int(_rng(seed).integers(int(G)))


def normal_to_uniform(z):
    """Standard normal CDF, clipped into the open interval (0, 1)."""
    z = np.asarray(z, dtype=np.float64)
    if not np.isfinite(z).all():
        raise ValueError("normal_to_uniform requires finite input")
    u = np.clip(ndtr(z), _U_LO, _U_HI)
    return float(u) if u.ndim == 0 else u


def stack_blocks(stores: Sequence[RandomNumberStore]):
    """Stack stores into batched arrays ``(B, T, N, n_u)``, ``(B, T)``, ``(B, N, n_extra)``."""
    return (
        np.stack([s.proposal_normals for s in stores]),
        np.stack([s.resampling_normals for s in stores]),
        np.stack([s.initial_extra for s in stores]),
    )
