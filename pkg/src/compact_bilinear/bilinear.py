"""Exact second-order pooling and the pairwise polynomial kernel it induces.

These are the ground-truth references for the compact approximations in
:mod:`compact_bilinear.rm` and :mod:`compact_bilinear.ts`.
"""

from __future__ import annotations

import numpy as np

from .core import LocalDescriptorGrid, PooledDescriptor, PoolKind, ShapeError


def bilinear_dim(c: int) -> int:
    return c * c


def bilinear_pool(grid: LocalDescriptorGrid) -> PooledDescriptor:
    """Sum of outer products ``x_s x_s^T`` over locations, flattened row-major.

    Returns a descriptor of length ``c**2`` per sample.
    """
    x = grid.locations
    B = np.matmul(x.transpose(0, 2, 1), x)
    return PooledDescriptor(B.reshape(grid.n, grid.c * grid.c), PoolKind.FULL_BILINEAR)


def bilinear_pool_backward(grid: LocalDescriptorGrid, grad_out) -> np.ndarray:
    """Gradient w.r.t. every local descriptor: ``(G + G^T) x_s``."""
    grad_out = np.asarray(grad_out, dtype=np.float64)
    c = grid.c
    if grad_out.shape != (grid.n, c * c):
        raise ShapeError(f"grad_out shape {grad_out.shape} != {(grid.n, c * c)}")
    G = grad_out.reshape(grid.n, c, c)
    S = G + G.transpose(0, 2, 1)
    # x_s^T S^T == (S x_s)^T; S is symmetric
    grad = np.matmul(grid.locations, S)
    return grad.reshape(grid.data.shape)


def exact_kernel(grid_a: LocalDescriptorGrid, grid_b: LocalDescriptorGrid) -> float:
    """Sum over all location pairs of the squared inner product.

    Computed from the pairwise Gram matrix, never through the c**2 descriptor,
    so it can serve as an independent check of :func:`bilinear_pool`.
    """
    if grid_a.n != 1 or grid_b.n != 1:
        raise ShapeError("exact_kernel compares single-sample grids")
    if grid_a.c != grid_b.c:
        raise ShapeError(f"channel mismatch: {grid_a.c} vs {grid_b.c}")
    gram = grid_a.locations[0] @ grid_b.locations[0].T
    return float(np.sum(gram * gram))
