"""Shared types, errors and seeded random generation."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class ShapeError(ValueError):
    """Array shapes or dimensions are inconsistent."""


class ParameterError(ValueError):
    """A generation parameter (dimension, count) is invalid."""


class ValidationError(ValueError):
    """Input data violates a documented invariant."""


class FormatError(ValidationError):
    """A file does not follow the expected binary layout."""


class TruncationError(FormatError):
    """A file payload is shorter or longer than its header declares."""


class PoolKind(enum.Enum):
    FULL_BILINEAR = "bilinear"
    RANDOM_MACLAURIN = "rm"
    TENSOR_SKETCH = "ts"


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what} contains NaN or Inf")


@dataclass(frozen=True)
class LocalDescriptorGrid:
    """A batch of ``n`` spatial grids of ``c``-dimensional local descriptors.

    ``data`` has shape ``(n, h, w, c)``: sample-major, then row, column,
    channel, so the descriptor at one location is contiguous. Values are
    held in float64 regardless of the dtype passed in.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        if arr.ndim != 4:
            raise ShapeError(f"grid data must be 4-d (n, h, w, c), got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ShapeError(f"all grid dimensions must be >= 1, got {arr.shape}")
        _check_finite(arr, "grid data")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def h(self) -> int:
        return self.data.shape[1]

    @property
    def w(self) -> int:
        return self.data.shape[2]

    @property
    def c(self) -> int:
        return self.data.shape[3]

    @property
    def locations(self) -> np.ndarray:
        """View of shape ``(n, h*w, c)``; row-major traversal of the grid."""
        return self.data.reshape(self.n, self.h * self.w, self.c)

    @classmethod
    def from_locations(cls, x, h: int | None = None, w: int | None = None):
        """Build a grid from an ``(n, S, c)`` array; defaults to ``h=S, w=1``."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3:
            raise ShapeError(f"expected (n, S, c) array, got shape {x.shape}")
        n, S, c = x.shape
        if h is None and w is None:
            h, w = S, 1
        elif h is None:
            h = S // w
        elif w is None:
            w = S // h
        if h * w != S:
            raise ShapeError(f"h*w = {h * w} does not match S = {S}")
        return cls(x.reshape(n, h, w, c))


@dataclass(frozen=True)
class PooledDescriptor:
    """Global descriptors, one row per sample."""

    data: np.ndarray
    kind: PoolKind

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ShapeError(f"pooled data must be 2-d (n, dim), got shape {arr.shape}")
        _check_finite(arr, "pooled data")
        if self.kind is PoolKind.FULL_BILINEAR:
            root = int(round(np.sqrt(arr.shape[1])))
            if root * root != arr.shape[1]:
                raise ShapeError(f"full bilinear dim {arr.shape[1]} is not a perfect square")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


@dataclass
class SeededRng:
    """Deterministic random stream keyed by a 64-bit seed and a stream path.

    Child streams are derived from ``(seed, path + (stream_id,))`` and never
    share state with the parent, so parameter generation can be split across
    workers without the result depending on scheduling.
    """

    seed: int
    path: tuple[int, ...] = ()
    _gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        self.seed = int(self.seed)
        self.path = tuple(int(p) for p in self.path)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, *stream_ids: int) -> SeededRng:
        return SeededRng(self.seed, self.path + tuple(stream_ids))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def integers(self, low, high, size=None) -> np.ndarray:
        return self._gen.integers(low, high, size=size)

    def signs(self, size) -> np.ndarray:
        """Independent uniform draws from {+1, -1} as float64."""
        return (2 * self._gen.integers(0, 2, size=size) - 1).astype(np.float64)

    def normal(self, loc=0.0, scale=1.0, size=None) -> np.ndarray:
        return self._gen.normal(loc, scale, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)


def as_rng(rng: SeededRng | int) -> SeededRng:
    return rng if isinstance(rng, SeededRng) else SeededRng(rng)


def descriptor_at(grid: LocalDescriptorGrid, sample: int, row: int, col: int) -> np.ndarray:
    """Return the c-vector stored at ``(sample, row, col)``."""
    for name, idx, size in (("sample", sample, grid.n), ("row", row, grid.h), ("col", col, grid.w)):
        if not 0 <= idx < size:
            raise IndexError(f"{name} index {idx} out of range [0, {size})")
    return grid.data[sample, row, col]
