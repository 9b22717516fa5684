"""Keyed random streams, the pairs bootstrap, and the shared quantile/ECDF rules.

Every random draw in the package comes from a stream addressed by
``(master_seed, path, attempt)``.  A stream is SplitMix64 run from a state
obtained by hashing the key, so the ``t``-th word of any stream can be computed
directly without touching other streams.  That is what makes results
independent of scheduling: work items never share generator state.

The same mixing arithmetic exists three times: pure-Python integers (key
derivation), vectorized numpy (``Stream``), and scalar numba (the nested
bootstrap kernels in :mod:`calboot._kernels`).  Tests pin them bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numba as nb
import numpy as np

from .errors import EmptySample
from .regress import Dataset

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
ROOT_SALT = 0x5851F42D4C957F2D
TWO_M53 = 2.0**-53

# |q*B - round(q*B)| below this is treated as an exact integer, so that decimal
# levels like 0.95 with B = 100 select the 95th order statistic.
QUANTILE_SNAP = 1e-9

_U_GAMMA = np.uint64(GAMMA)
_U_MIX1 = np.uint64(MIX1)
_U_MIX2 = np.uint64(MIX2)
_U_SALT = np.uint64(ROOT_SALT)
_U_ONE = np.uint64(1)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def root_hash(master_seed: int) -> int:
    return mix64((master_seed & MASK64) ^ ROOT_SALT)


def child_hash(h: int, element: int) -> int:
    return mix64(h + (element + 1) * GAMMA)


def final_hash(h: int, attempt: int) -> int:
    return mix64(h ^ (((attempt + 1) * MIX2) & MASK64))


@dataclass(frozen=True)
class StreamKey:
    master_seed: int
    path: tuple[int, ...] = ()
    attempt: int = 0

    def __post_init__(self):
        path = tuple(int(e) for e in self.path)
        if len(path) > 3:
            raise ValueError("stream paths hold at most 3 elements")
        if any(e < 0 for e in path) or self.attempt < 0:
            raise ValueError("path elements and attempt must be nonnegative")
        if not 0 <= self.master_seed <= MASK64:
            raise ValueError("master_seed must fit in an unsigned 64-bit integer")
        object.__setattr__(self, "path", path)

    def state(self) -> int:
        h = root_hash(self.master_seed)
        for e in self.path:
            h = child_hash(h, e)
        return final_hash(h, self.attempt)

    def child(self, element: int) -> StreamKey:
        return StreamKey(self.master_seed, self.path + (element,))

    def retry(self, attempt: int) -> StreamKey:
        return StreamKey(self.master_seed, self.path, attempt)


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _U_MIX1
    z = (z ^ (z >> _S27)) * _U_MIX2
    return z ^ (z >> _S31)


class Stream:
    """Sequential view over the words of one keyed stream.

    Not thread-safe: a stream is consumed by one task.  Draws continue where the
    previous call stopped.
    """

    def __init__(self, key: StreamKey):
        self.key = key
        self._state = np.uint64(key.state())
        self._pos = 0

    def words(self, size: int) -> np.ndarray:
        t = np.arange(self._pos + 1, self._pos + size + 1, dtype=np.uint64)
        self._pos += size
        with np.errstate(over="ignore"):
            return _mix_array(self._state + t * _U_GAMMA)

    def uniform(self, size: int) -> np.ndarray:
        """Doubles in ``[0, 1)`` from the top 53 bits of each word."""
        return (self.words(size) >> _S11).astype(np.float64) * TWO_M53

    def integers(self, n: int, size: int) -> np.ndarray:
        """Indices in ``[0, n)``: ``floor(u * n)``, clipped against rounding up to ``n``."""
        idx = (self.uniform(size) * n).astype(np.int64)
        return np.minimum(idx, n - 1)

    def numpy(self) -> np.random.Generator:
        """A numpy Generator seeded from this stream's key, for non-uniform variates."""
        return np.random.Generator(np.random.PCG64(int(self._state)))


def derive_stream(key: StreamKey) -> Stream:
    return Stream(key)


def pairs_resample_rows(n: int, stream: Stream) -> np.ndarray:
    return stream.integers(n, n)


def pairs_resample(data: Dataset, stream: Stream) -> Dataset:
    """Draw ``n`` whole rows uniformly with replacement."""
    return data.take(pairs_resample_rows(data.n, stream))


def quantile_rank(q: float, b: int) -> int:
    """1-based order-statistic rank ``ceil(q * b)`` used by :func:`empirical_quantile`."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {q}")
    qb = q * b
    r = round(qb)
    rank = r if abs(qb - r) < QUANTILE_SNAP else math.ceil(qb)
    return min(max(rank, 1), b)


def empirical_quantile(values: Sequence[float], q: float) -> float:
    """Ceiling order statistic ``x_(ceil(qB))``; always an element of ``values``."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise EmptySample("empirical_quantile of an empty sample")
    rank = quantile_rank(q, v.size)
    return float(np.partition(v, rank - 1)[rank - 1])


def ecdf_position(values: Sequence[float], x: float) -> float:
    """``#{v <= x} / B``."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise EmptySample("ecdf_position of an empty sample")
    return float(np.count_nonzero(v <= x)) / v.size


# numba twins of the hashing above, for the compiled resampling loops


@nb.njit(cache=True, inline="always")
def nb_mix64(z):
    z = (z ^ (z >> _S30)) * _U_MIX1
    z = (z ^ (z >> _S27)) * _U_MIX2
    return z ^ (z >> _S31)


@nb.njit(cache=True, inline="always")
def nb_child(h, element):
    return nb_mix64(h + np.uint64(element + 1) * _U_GAMMA)


@nb.njit(cache=True, inline="always")
def nb_final(h, attempt):
    return nb_mix64(h ^ (np.uint64(attempt + 1) * _U_MIX2))


@nb.njit(cache=True, inline="always")
def nb_index(state, t, n):
    """Index drawn by word ``t`` (0-based) of the stream with ``state``."""
    w = nb_mix64(state + np.uint64(t + 1) * _U_GAMMA)
    u = np.float64(w >> _S11) * TWO_M53
    i = np.int64(u * n)
    return i if i < n else n - 1
