"""Random Maclaurin compact bilinear pooling.

``phi(x) = (W1 x) * (W2 x) / sqrt(d)`` with Rademacher ``W1, W2`` of shape
``(d, c)``; pooled features sum ``phi`` over spatial locations.
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


@dataclass(frozen=True)
class RmParams:
    W1: np.ndarray
    W2: np.ndarray

    def __post_init__(self):
        W1 = np.asarray(self.W1, dtype=np.float64)
        W2 = np.asarray(self.W2, dtype=np.float64)
        if W1.ndim != 2 or W1.shape != W2.shape:
            raise ShapeError(f"W1 {W1.shape} and W2 {W2.shape} must be equal 2-d shapes")
        if min(W1.shape) < 1:
            raise ParameterError("RM projection needs c, d >= 1")
        W1.setflags(write=False)
        W2.setflags(write=False)
        object.__setattr__(self, "W1", W1)
        object.__setattr__(self, "W2", W2)

    @property
    def d(self) -> int:
        return self.W1.shape[0]

    @property
    def c(self) -> int:
        return self.W1.shape[1]

    def nbytes(self, itemsize: int = 4) -> int:
        """Parameter storage, ``2*c*d`` values."""
        return 2 * self.c * self.d * itemsize


def gen_rm(c: int, d: int, rng: SeededRng | int) -> RmParams:
    if c < 1 or d < 1:
        raise ParameterError(f"RM projection needs c, d >= 1 (got c={c}, d={d})")
    rng = as_rng(rng)
    return RmParams(rng.child(1).signs((d, c)), rng.child(2).signs((d, c)))


def rm_project(x, p: RmParams) -> np.ndarray:
    """Project one vector (or a stack along the last axis) to length d."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != p.c:
        raise ShapeError(f"input length {x.shape[-1]} != {p.c}")
    return (x @ p.W1.T) * (x @ p.W2.T) / np.sqrt(p.d)


def _check_grid(grid: LocalDescriptorGrid, p: RmParams):
    if grid.c != p.c:
        raise ShapeError(f"grid has c={grid.c}, projection expects c={p.c}")


def rm_pool(grid: LocalDescriptorGrid, p: RmParams) -> PooledDescriptor:
    _check_grid(grid, p)
    x = grid.locations
    y = np.einsum("nsd,nsd->nd", x @ p.W1.T, x @ p.W2.T) / np.sqrt(p.d)
    return PooledDescriptor(y, PoolKind.RANDOM_MACLAURIN)


def rm_backward(grid: LocalDescriptorGrid, p: RmParams, grad_out, *, compute_w: bool = True):
    """Gradients of ``L`` given ``dL/dy`` of shape ``(n, d)``.

    Returns ``(grad_x, grad_W1, grad_W2)``; ``grad_x`` is grid-shaped and the
    W gradients accumulate over the batch. With ``compute_w=False`` the W
    gradients are returned as ``None``.
    """
    _check_grid(grid, p)
    g = np.asarray(grad_out, dtype=np.float64)
    if g.shape != (grid.n, p.d):
        raise ShapeError(f"grad_out shape {g.shape} != {(grid.n, p.d)}")
    x = grid.locations
    scale = 1.0 / np.sqrt(p.d)
    a1 = x @ p.W1.T  # (n, S, d)
    a2 = x @ p.W2.T
    g = g[:, None, :] * scale
    grad_x = (g * a2) @ p.W1 + (g * a1) @ p.W2
    grad_x = grad_x.reshape(grid.data.shape)
    if not compute_w:
        return grad_x, None, None
    gW1 = np.einsum("nsd,nsc->dc", g * a2, x)
    gW2 = np.einsum("nsd,nsc->dc", g * a1, x)
    return grad_x, gW1, gW2
