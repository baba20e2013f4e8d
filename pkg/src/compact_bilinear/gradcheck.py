"""Central finite-difference checks for every hand-written backward pass."""

from __future__ import annotations

import numpy as np

from .bilinear import bilinear_pool, bilinear_pool_backward
from .core import LocalDescriptorGrid, ParameterError, SeededRng, as_rng
from .postproc import (
    l2_normalize,
    l2_normalize_backward,
    signed_sqrt,
    signed_sqrt_backward,
)
from .rm import RmParams, gen_rm, rm_backward, rm_pool
from .ts import TsParams, gen_ts, ts_backward, ts_pool

METHODS = ("bilinear", "rm", "ts", "signed_sqrt", "l2norm")
DEFAULT_EPS = 1e-6
PASS_THRESHOLD = 1e-5


def numerical_grad(f, x, eps=DEFAULT_EPS) -> np.ndarray:
    """Central differences of scalar ``f`` at ``x``; the step scales with ``max(1, |x_i|)``."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        step = eps * max(1.0, abs(orig))
        flat[i] = orig + step
        fp = f(x)
        flat[i] = orig - step
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * step)
    return grad


def max_rel_error(analytic, numeric, floor: float = 1e-3) -> float:
    """Largest entry-wise ``|a - n| / max(|a|, |n|, floor * scale)``.

    ``scale`` is the largest magnitude in either array, so entries many
    orders below the gradient's scale are judged against that floor instead
    of their own (possibly roundoff-sized) value.
    """
    a = np.asarray(analytic, dtype=np.float64)
    b = np.asarray(numeric, dtype=np.float64)
    scale = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0))
    if scale == 0.0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor * scale)
    return float(np.max(np.abs(a - b) / denom))


def _grid(x):
    return LocalDescriptorGrid(x)


def check_bilinear(x, grad_out, eps=DEFAULT_EPS):
    ana = bilinear_pool_backward(_grid(x), grad_out)
    num = numerical_grad(lambda v: np.sum(grad_out * bilinear_pool(_grid(v)).data), x, eps)
    return {"x": max_rel_error(ana, num)}


def check_rm(x, p: RmParams, grad_out, eps=DEFAULT_EPS):
    gx, gW1, gW2 = rm_backward(_grid(x), p, grad_out)
    grid = _grid(x)

    def loss(v):
        return np.sum(grad_out * rm_pool(_grid(v), p).data)

    return {
        "x": max_rel_error(gx, numerical_grad(loss, x, eps)),
        "W1": max_rel_error(
            gW1,
            numerical_grad(lambda W: np.sum(grad_out * rm_pool(grid, RmParams(W, p.W2)).data), p.W1, eps),
        ),
        "W2": max_rel_error(
            gW2,
            numerical_grad(lambda W: np.sum(grad_out * rm_pool(grid, RmParams(p.W1, W)).data), p.W2, eps),
        ),
    }


def check_ts(x, p: TsParams, grad_out, eps=DEFAULT_EPS):
    gx, gs1, gs2 = ts_backward(_grid(x), p, grad_out)
    grid = _grid(x)
    s1, s2 = p.sketch1.s, p.sketch2.s

    def loss_x(v):
        return np.sum(grad_out * ts_pool(_grid(v), p).data)

    def loss_s1(s):
        return np.sum(grad_out * ts_pool(grid, p.with_signs(s, s2)).data)

    def loss_s2(s):
        return np.sum(grad_out * ts_pool(grid, p.with_signs(s1, s)).data)

    return {
        "x": max_rel_error(gx, numerical_grad(loss_x, x, eps)),
        "s1": max_rel_error(gs1, numerical_grad(loss_s1, s1, eps)),
        "s2": max_rel_error(gs2, numerical_grad(loss_s2, s2, eps)),
    }


def check_signed_sqrt(v, grad_out, eps=DEFAULT_EPS):
    ana = signed_sqrt_backward(v, grad_out)
    num = numerical_grad(lambda u: np.sum(grad_out * signed_sqrt(u)), v, eps)
    return {"v": max_rel_error(ana, num)}


def check_l2norm(v, grad_out, eps=DEFAULT_EPS):
    ana = l2_normalize_backward(v, grad_out)
    num = numerical_grad(lambda u: np.sum(grad_out * l2_normalize(u)), v, eps)
    return {"v": max_rel_error(ana, num)}


def run_gradcheck(method: str, c: int = 8, d: int = 16, h: int = 2, w: int = 2,
                  seed: SeededRng | int = 0, eps: float = DEFAULT_EPS, n: int = 2) -> dict:
    """Build a random instance for ``method`` and return max relative error per gradient."""
    if method not in METHODS:
        raise ParameterError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    if not eps > 0:
        raise ParameterError("finite-difference step must be positive")
    rng = as_rng(seed)
    x = rng.child(0).normal(size=(n, h, w, c))
    if method == "bilinear":
        return check_bilinear(x, rng.child(1).normal(size=(n, c * c)), eps)
    if method == "rm":
        return check_rm(x, gen_rm(c, d, rng.child(2)), rng.child(1).normal(size=(n, d)), eps)
    if method == "ts":
        return check_ts(x, gen_ts(c, d, rng.child(2)), rng.child(1).normal(size=(n, d)), eps)
    if method == "signed_sqrt":
        # stay on the smooth part of the domain, |v| >= 0.1
        gen = rng.child(3).generator
        v = rng.child(4).signs((n, d)) * gen.uniform(0.1, 2.0, size=(n, d))
        return check_signed_sqrt(v, rng.child(1).normal(size=(n, d)), eps)
    v = rng.child(4).normal(size=(n, d))
    return check_l2norm(v, rng.child(1).normal(size=(n, d)), eps)
