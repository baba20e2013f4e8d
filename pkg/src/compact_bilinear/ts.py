"""Tensor Sketch compact bilinear pooling.

Each location is sketched twice with independent Count Sketches and the two
sketches are circularly convolved, which equals the Count Sketch of the
outer product ``x x^T`` under the hash ``(h1(i) + h2(j)) mod d`` and sign
``s1(i) s2(j)``. Pooling sums the result over locations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    LocalDescriptorGrid,
    ParameterError,
    PooledDescriptor,
    PoolKind,
    SeededRng,
    ShapeError,
    as_rng,
)
from .sketch import (
    CountSketchParams,
    circ_conv_fast,
    count_sketch,
    count_sketch_adjoint,
    gen_count_sketch,
)


@dataclass(frozen=True)
class TsParams:
    sketch1: CountSketchParams
    sketch2: CountSketchParams

    def __post_init__(self):
        a, b = self.sketch1, self.sketch2
        if (a.c, a.d) != (b.c, b.d):
            raise ShapeError(f"sketch shapes differ: {(a.c, a.d)} vs {(b.c, b.d)}")

    @property
    def c(self) -> int:
        return self.sketch1.c

    @property
    def d(self) -> int:
        return self.sketch1.d

    def nbytes(self, itemsize: int = 4) -> int:
        """Tunable parameter storage: the two sign vectors, ``2*c`` values."""
        return 2 * self.c * itemsize

    def with_signs(self, s1, s2) -> TsParams:
        return TsParams(self.sketch1.with_signs(s1), self.sketch2.with_signs(s2))


def gen_ts(c: int, d: int, rng: SeededRng | int) -> TsParams:
    if c < 1 or d < 1:
        raise ParameterError(f"Tensor Sketch needs c, d >= 1 (got c={c}, d={d})")
    rng = as_rng(rng)
    return TsParams(gen_count_sketch(c, d, rng.child(1)), gen_count_sketch(c, d, rng.child(2)))


def ts_project(x, p: TsParams) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != p.c:
        raise ShapeError(f"input length {x.shape[-1]} != {p.c}")
    return circ_conv_fast(count_sketch(x, p.sketch1), count_sketch(x, p.sketch2))


@dataclass
class TsCache:
    """Per-location sketches kept from the forward pass, shape ``(n, S, d)``."""

    psi1: np.ndarray
    psi2: np.ndarray


def _check_grid(grid: LocalDescriptorGrid, p: TsParams):
    if grid.c != p.c:
        raise ShapeError(f"grid has c={grid.c}, sketch expects c={p.c}")


def _sketches(grid, p):
    x = grid.locations
    return count_sketch(x, p.sketch1), count_sketch(x, p.sketch2)


def ts_forward(grid: LocalDescriptorGrid, p: TsParams, *, keep_cache: bool = False):
    """Pool a grid; optionally return the sketches needed by the backward pass."""
    _check_grid(grid, p)
    psi1, psi2 = _sketches(grid, p)
    # convolution is linear in the product of spectra, so sum over
    # locations before the single inverse transform
    spec = np.sum(np.fft.rfft(psi1, axis=-1) * np.fft.rfft(psi2, axis=-1), axis=1)
    y = np.fft.irfft(spec, n=p.d, axis=-1)
    pooled = PooledDescriptor(y, PoolKind.TENSOR_SKETCH)
    return (pooled, TsCache(psi1, psi2)) if keep_cache else (pooled, None)


def ts_pool(grid: LocalDescriptorGrid, p: TsParams) -> PooledDescriptor:
    return ts_forward(grid, p)[0]


def ts_backward(grid: LocalDescriptorGrid, p: TsParams, grad_out, *, cache: TsCache | None = None,
                compute_s: bool = True):
    """Return ``(grad_x, grad_s1, grad_s2)`` for upstream gradient ``(n, d)``.

    The hashes are discrete and receive no gradient. Sketches are recomputed
    unless a forward ``cache`` is supplied.
    """
    _check_grid(grid, p)
    g = np.asarray(grad_out, dtype=np.float64)
    if g.shape != (grid.n, p.d):
        raise ShapeError(f"grad_out shape {g.shape} != {(grid.n, p.d)}")
    if cache is None:
        psi1, psi2 = _sketches(grid, p)
    else:
        psi1, psi2 = cache.psi1, cache.psi2

    # d<g, psi1 * psi2> / d psi1 = corr(g, psi2), and symmetrically
    G = np.fft.rfft(g, axis=-1)[:, None, :]
    g1 = np.fft.irfft(G * np.conj(np.fft.rfft(psi2, axis=-1)), n=p.d, axis=-1)
    g2 = np.fft.irfft(G * np.conj(np.fft.rfft(psi1, axis=-1)), n=p.d, axis=-1)

    grad_x = count_sketch_adjoint(g1, p.sketch1) + count_sketch_adjoint(g2, p.sketch2)
    grad_x = grad_x.reshape(grid.data.shape)
    if not compute_s:
        return grad_x, None, None
    x = grid.locations
    gs1 = np.einsum("nsc,nsc->c", x, g1[..., p.sketch1.h])
    gs2 = np.einsum("nsc,nsc->c", x, g2[..., p.sketch2.h])
    return grad_x, gs1, gs2
