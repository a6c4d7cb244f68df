"""Low-discrepancy and pseudo-random point sets on the unit cube.

Sobol points are generated in Gray-code order from the embedded Joe-Kuo
direction numbers. Randomized replicas share one base set and differ only by
a uniform shift modulo 1, which keeps each replica low-discrepancy while
making the replica means independent estimates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ._sobol_table import DIRECTION_TABLE

MAX_DIM = len(DIRECTION_TABLE) + 1
_BITS = 52

# stream ids keep shift, crude MC and auxiliary draws independent for one seed
STREAM_SHIFT = 0
STREAM_CMC = 1


class UnsupportedDimension(ValueError):
    pass


class GeneratorKind(str, Enum):
    SOBOL_SHIFTED = "sobol_shifted"
    CRUDE_MC = "crude_mc"


def _direction_integers(dim: int) -> np.ndarray:
    """Direction integers ``v[j, k]`` scaled to ``_BITS`` bits."""
    v = np.zeros((dim, _BITS), dtype=np.uint64)
    # first coordinate: van der Corput, m_k = 1
    for k in range(_BITS):
        v[0, k] = 1 << (_BITS - 1 - k)
    for j in range(1, dim):
        s, a, m_init = DIRECTION_TABLE[j - 1]
        m = list(m_init)
        for k in range(s, _BITS):
            new = m[k - s] ^ (m[k - s] << s)
            for i in range(1, s):
                if (a >> (s - 1 - i)) & 1:
                    new ^= m[k - i] << i
            m.append(new)
        for k in range(_BITS):
            v[j, k] = m[k] << (_BITS - 1 - k)
    return v


_DIRECTIONS_CACHE: dict[int, np.ndarray] = {}


def _directions(dim: int) -> np.ndarray:
    if dim not in _DIRECTIONS_CACHE:
        _DIRECTIONS_CACHE[dim] = _direction_integers(dim)
    return _DIRECTIONS_CACHE[dim]


def sobol_points(dim: int, n: int) -> np.ndarray:
    """First ``n`` Sobol points in ``[0, 1)^dim`` (Gray-code order, zero point skipped).

    Returns an ``(n, dim)`` float array. Deterministic and identical on every
    platform: each coordinate is an exact dyadic rational.
    """
    if not 1 <= dim <= MAX_DIM:
        raise UnsupportedDimension(f"Sobol dimension must be in [1, {MAX_DIM}], got {dim}")
    if n < 1:
        raise ValueError("n must be positive")
    if n >= 1 << _BITS:
        raise ValueError("too many points for the direction-number precision")
    v = _directions(dim)
    k = np.arange(1, n + 1, dtype=np.uint64)
    gray = k ^ (k >> np.uint64(1))
    acc = np.zeros((n, dim), dtype=np.uint64)
    for bit in range(int(n).bit_length() + 1):
        mask = ((gray >> np.uint64(bit)) & np.uint64(1)).astype(bool)
        if not mask.any():
            continue
        acc[mask] ^= v[:, bit]
    return acc.astype(np.float64) * 2.0 ** -_BITS


def rng_for(seed: int, stream: int) -> np.random.Generator:
    """Counter-based (Philox) generator for one ``(seed, stream)`` pair."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(stream,))))


@dataclass(frozen=True)
class SampleBatch:
    """``replicas`` point sets of ``points_per_replica`` points in ``[0,1)^dim``.

    For ``SOBOL_SHIFTED`` every replica is ``(base + shifts[r]) mod 1``; replicas
    are materialized on demand by :meth:`replica` to avoid holding them all.
    """

    kind: GeneratorKind
    base: np.ndarray = field(repr=False)
    shifts: np.ndarray = field(repr=False)
    seed: int | None = None

    @property
    def dim(self) -> int:
        return self.base.shape[1]

    @property
    def points_per_replica(self) -> int:
        return self.base.shape[0]

    @property
    def replicas(self) -> int:
        return self.shifts.shape[0]

    def replica(self, r: int) -> np.ndarray:
        if self.kind is GeneratorKind.CRUDE_MC:
            return self.base
        out = self.base + self.shifts[r]
        out -= np.floor(out)
        return out

    @property
    def points(self) -> np.ndarray:
        """All replicas stacked as ``(R, n, dim)``."""
        return np.stack([self.replica(r) for r in range(self.replicas)])


def shifted_replicas(base: np.ndarray, R: int, seed: int) -> SampleBatch:
    """Random-shift ``R`` copies of ``base`` modulo 1 (Cranley-Patterson)."""
    if R < 2:
        raise ValueError("at least two replicas are needed for an error estimate")
    base = np.asarray(base, dtype=float)
    if base.ndim != 2:
        raise ValueError("base must be an (n, dim) array")
    shifts = rng_for(seed, STREAM_SHIFT).random((R, base.shape[1]))
    return SampleBatch(GeneratorKind.SOBOL_SHIFTED, base, shifts, seed)


def sobol_batch(dim: int, n: int, R: int, seed: int) -> SampleBatch:
    return shifted_replicas(sobol_points(dim, n), R, seed)


def cmc_points(dim: int, n: int, seed: int) -> SampleBatch:
    """One replica of ``n`` i.i.d. uniform points; errors come from per-point variance."""
    if n < 1 or dim < 1:
        raise ValueError("dim and n must be positive")
    pts = rng_for(seed, STREAM_CMC).random((n, dim))
    return SampleBatch(GeneratorKind.CRUDE_MC, pts, np.zeros((1, dim)), seed)


@dataclass(frozen=True)
class IntegrationBox:
    """Axis-aligned box ``centers +- half_width`` in intermediate log-prices."""

    centers: np.ndarray
    half_width: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.centers, dtype=float))
        w = np.broadcast_to(np.asarray(self.half_width, dtype=float), c.shape).copy()
        if c.ndim != 1:
            raise ValueError("centers must be one-dimensional")
        if not np.all(w > 0):
            raise ValueError("degenerate box: every half-width must be positive")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "half_width", w)

    @property
    def dim(self) -> int:
        return self.centers.size

    @property
    def jacobian(self) -> float:
        return float(np.prod(2.0 * self.half_width))

    def shifted(self, offset: float) -> "IntegrationBox":
        return IntegrationBox(self.centers + offset, self.half_width)


def map_to_box(points, box: IntegrationBox):
    """Map unit-cube point(s) affinely into ``box``.

    Returns ``(x, jacobian)`` where ``x = centers + (2u - 1) * half_width``.
    Accepts a single point of shape ``(dim,)`` or a batch ``(n, dim)``.
    """
    u = np.asarray(points, dtype=float)
    if u.shape[-1] != box.dim:
        raise ValueError(f"point dimension {u.shape[-1]} does not match box dimension {box.dim}")
    return box.centers + (2.0 * u - 1.0) * box.half_width, box.jacobian
