"""Descriptor normalization layers and the linear classifier used on top.

Pooled descriptors go through an element-wise signed square root and a
per-row l2 normalization before classification. The classifier is a
multinomial logistic regression with an l2 penalty on the weights, trained
full-batch so results are reproducible.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import (
    PooledDescriptor,
    PoolKind,
    SeededRng,
    ShapeError,
    ValidationError,
    as_rng,
)
from .io import LabelTable

log = logging.getLogger(__name__)

SQRT_EPS = 1e-8
DEFAULT_LAMBDA = 0.001


def signed_sqrt(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.sqrt(np.abs(v))


def signed_sqrt_backward(v, grad) -> np.ndarray:
    # derivative 1 / (2 sqrt|x|) is unbounded at 0; clamp the denominator
    v = np.asarray(v, dtype=np.float64)
    return np.asarray(grad, dtype=np.float64) / (2.0 * np.maximum(np.sqrt(np.abs(v)), SQRT_EPS))


def _rows(v):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 2:
        raise ShapeError(f"expected a 2-d (n, dim) matrix, got shape {v.shape}")
    return v


def l2_normalize(v) -> np.ndarray:
    """Divide each row by its l2 norm; all-zero rows stay zero."""
    v = _rows(v)
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    return np.divide(v, norms, out=np.zeros_like(v), where=norms > 0)


def l2_normalize_backward(v, grad) -> np.ndarray:
    """Vector-Jacobian product of :func:`l2_normalize`: ``(g - y <y, g>) / ||v||``."""
    v = _rows(v)
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != v.shape:
        raise ShapeError(f"grad shape {grad.shape} != input shape {v.shape}")
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    y = np.divide(v, norms, out=np.zeros_like(v), where=norms > 0)
    proj = grad - y * np.sum(y * grad, axis=1, keepdims=True)
    return np.divide(proj, norms, out=np.zeros_like(v), where=norms > 0)


@dataclass(frozen=True)
class NormalizedDescriptor:
    data: np.ndarray
    kind: PoolKind
    signed_sqrt: bool = True
    l2: bool = True


def normalize(pooled: PooledDescriptor | np.ndarray, kind: PoolKind | None = None) -> NormalizedDescriptor:
    """Signed square root followed by row-wise l2 normalization."""
    if isinstance(pooled, PooledDescriptor):
        kind, data = pooled.kind, pooled.data
    else:
        data = _rows(pooled)
    return NormalizedDescriptor(l2_normalize(signed_sqrt(data)), kind)


# --- classifier -----------------------------------------------------------------


@dataclass(frozen=True)
class LogRegConfig:
    max_iter: int = 2000
    tol: float = 1e-6
    step0: float = 1.0
    shrink: float = 0.5
    armijo: float = 1e-4
    max_backtracks: int = 60


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    bias: np.ndarray
    lam: float = DEFAULT_LAMBDA
    history: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if self.lam < 0:
            raise ValidationError("lambda must be non-negative")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ValidationError("model parameters must be finite")

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _objective(W, b, X, Y, lam):
    z = X @ W.T + b
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    loss = np.sum(lse - np.sum(z * Y, axis=1))
    return loss + lam * np.sum(W * W), z


def _dense_labels(labels, n):
    if isinstance(labels, LabelTable):
        return labels.dense(n)
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if y.shape[0] != n:
        raise ShapeError(f"{y.shape[0]} labels for {n} samples")
    return y


def train_logreg(features, labels, k: int | None = None, lam: float = DEFAULT_LAMBDA,
                 config: LogRegConfig | None = None) -> LinearModel:
    """Minimise ``lam * ||W||^2 + sum_i softmax_xent(W x_i + b, y_i)``.

    Gradient descent with Armijo backtracking. The trial step of each
    iteration is the Barzilai-Borwein estimate from the previous step (or
    ``config.step0`` initially) and is halved until the sufficient-decrease
    condition holds, so the objective never increases. Stops when the
    gradient's max-abs entry drops below ``config.tol`` or after
    ``config.max_iter`` iterations. The bias is not penalised. The accepted objective values are kept in ``history``.
    """
    config = config or LogRegConfig()
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"features must be 2-d, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValidationError("features contain NaN or Inf")
    if lam < 0:
        raise ValidationError("lambda must be non-negative")
    n, dim = X.shape
    y = _dense_labels(labels, n)
    k = int(y.max()) + 1 if k is None else int(k)
    if k < 2:
        raise ValidationError("need at least two classes")
    if np.any(y < 0) or np.any(y >= k):
        raise ValidationError(f"labels must lie in [0, {k})")
    counts = np.bincount(y, minlength=k)
    if np.any(counts == 0):
        raise ValidationError(f"classes without samples: {np.flatnonzero(counts == 0).tolist()}")

    Y = np.eye(k)[y]
    W = np.zeros((k, dim))
    b = np.zeros(k)
    f, z = _objective(W, b, X, Y, lam)
    history = [f]
    step = config.step0
    prev = None
    for it in range(config.max_iter):
        R = _softmax(z) - Y
        gW = R.T @ X + 2.0 * lam * W
        gb = R.sum(axis=0)
        if max(np.abs(gW).max(), np.abs(gb).max()) < config.tol:
            break
        if prev is not None:
            dW, db, dgW, dgb = W - prev[0], b - prev[1], gW - prev[2], gb - prev[3]
            sy = np.sum(dW * dgW) + np.sum(db * dgb)
            if sy > 0:
                step = (np.sum(dW * dW) + np.sum(db * db)) / sy
        gnorm2 = np.sum(gW * gW) + np.sum(gb * gb)
        for _ in range(config.max_backtracks):
            W_new, b_new = W - step * gW, b - step * gb
            f_new, z_new = _objective(W_new, b_new, X, Y, lam)
            if f_new <= f - config.armijo * step * gnorm2:
                break
            step *= config.shrink
        else:
            log.debug("line search failed at iteration %d", it)
            break
        prev = (W, b, gW, gb)
        W, b, f, z = W_new, b_new, f_new, z_new
        history.append(f)
    return LinearModel(W, b, lam, tuple(history))


def predict(model: LinearModel, features):
    """Return ``(class_ids, probabilities)``."""
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.dim:
        raise ShapeError(f"features shape {X.shape} incompatible with model dim {model.dim}")
    probs = _softmax(X @ model.weights.T + model.bias)
    return probs.argmax(axis=1), probs


def accuracy(model: LinearModel, features, labels) -> float:
    ids, _ = predict(model, features)
    y = _dense_labels(labels, len(ids))
    return float(np.mean(ids == y))


# --- few-shot protocol ----------------------------------------------------------


@dataclass(frozen=True)
class FewShotRow:
    shots: int
    mean: float
    std: float
    accuracies: tuple


def split_per_class(y, test_per_class: int, rng: SeededRng):
    """Shuffle each class; the last ``test_per_class`` items form the test set.

    Returns ``(pools, test_idx)`` where ``pools[k]`` lists the remaining
    (training-candidate) indices of class ``k`` in shuffled order.
    """
    k = int(y.max()) + 1
    pools, test = [], []
    for cls in range(k):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.child(cls).permutation(len(idx))]
        cut = len(idx) - test_per_class
        pools.append(idx[:cut])
        test.append(idx[cut:])
    return pools, np.concatenate(test)


def fewshot_eval(features, labels, shots, trials: int, rng: SeededRng | int,
                 test_per_class: int | None = None, lam: float = DEFAULT_LAMBDA,
                 config: LogRegConfig | None = None) -> list[FewShotRow]:
    """Accuracy as a function of training examples per class.

    Each trial draws a fresh per-class split: ``test_per_class`` held-out
    samples (default: everything beyond ``max(shots)``) and a shuffled
    training pool. A model trained on the first ``s`` pool items of every
    class is scored on the held-out set, for each ``s`` in ``shots``.
    Within a trial the training sets are nested, so the shot counts are
    compared on identical test data.
    """
    X = np.asarray(features, dtype=np.float64)
    y = _dense_labels(labels, X.shape[0])
    shots = [int(s) for s in shots]
    if not shots or min(shots) < 1:
        raise ValidationError("shot counts must be positive")
    if trials < 1:
        raise ValidationError("need at least one trial")
    rng = as_rng(rng)
    k = int(y.max()) + 1
    counts = np.bincount(y, minlength=k)
    smax = max(shots)
    if test_per_class is None:
        test_per_class = int(counts.min()) - smax
    if test_per_class < 1 or np.any(counts < smax + test_per_class):
        raise ValidationError(
            f"every class needs {smax} training plus at least one held-out sample; "
            f"smallest class has {counts.min()}"
        )

    acc = np.zeros((trials, len(shots)))
    for t in range(trials):
        pools, test_idx = split_per_class(y, test_per_class, rng.child(t))
        for j, s in enumerate(shots):
            train_idx = np.concatenate([p[:s] for p in pools])
            model = train_logreg(X[train_idx], y[train_idx], k=k, lam=lam, config=config)
            acc[t, j] = accuracy(model, X[test_idx], y[test_idx])
    return [
        FewShotRow(s, float(acc[:, j].mean()), float(acc[:, j].std()), tuple(acc[:, j]))
        for j, s in enumerate(shots)
    ]
