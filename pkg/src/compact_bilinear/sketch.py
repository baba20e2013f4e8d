"""Count Sketch and circular convolution.

Bucket indices are 0-based: a hash maps into ``{0, ..., d-1}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .core import ParameterError, SeededRng, ShapeError, ValidationError, as_rng

# child stream ids used when deriving hash and sign streams
HASH_STREAM = 0
SIGN_STREAM = 1


@dataclass(frozen=True)
class CountSketchParams:
    """Hash ``h`` (length c, values in [0, d)) and signs ``s`` (length c).

    ``s`` starts in {+1, -1}; once tuned it may hold arbitrary reals.
    """

    c: int
    d: int
    h: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        if self.c < 1 or self.d < 1:
            raise ParameterError(f"count sketch needs c, d >= 1 (got c={self.c}, d={self.d})")
        h = np.asarray(self.h, dtype=np.int64)
        s = np.asarray(self.s, dtype=np.float64)
        if h.shape != (self.c,) or s.shape != (self.c,):
            raise ShapeError(f"h and s must have shape ({self.c},)")
        if np.any(h < 0) or np.any(h >= self.d):
            raise ValidationError(f"hash values must lie in [0, {self.d})")
        h.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "s", s)

    def matrix(self) -> sparse.csr_matrix:
        """The sketch as a sparse ``c x d`` matrix, so that ``x @ M`` sketches rows of x."""
        return sparse.csr_matrix(
            (self.s, (np.arange(self.c), self.h)), shape=(self.c, self.d)
        )

    def with_signs(self, s) -> CountSketchParams:
        return CountSketchParams(self.c, self.d, self.h, s)


def gen_count_sketch(c: int, d: int, rng: SeededRng | int) -> CountSketchParams:
    if c < 1 or d < 1:
        raise ParameterError(f"count sketch needs c, d >= 1 (got c={c}, d={d})")
    rng = as_rng(rng)
    h = rng.child(HASH_STREAM).integers(0, d, size=c)
    s = rng.child(SIGN_STREAM).signs(c)
    return CountSketchParams(c, d, h, s)


def count_sketch(x, p: CountSketchParams) -> np.ndarray:
    """Sketch the last axis of ``x`` from length c down to length d.

    ``out[..., j] = sum over t with h[t] == j of s[t] * x[..., t]``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != p.c:
        raise ShapeError(f"input length {x.shape[-1]} != sketch input dim {p.c}")
    lead = x.shape[:-1]
    flat = x.reshape(-1, p.c)
    out = np.asarray(flat @ p.matrix())
    return out.reshape(*lead, p.d)


def count_sketch_adjoint(g, p: CountSketchParams) -> np.ndarray:
    """Transpose of :func:`count_sketch`: ``out[..., t] = s[t] * g[..., h[t]]``."""
    g = np.asarray(g, dtype=np.float64)
    if g.shape[-1] != p.d:
        raise ShapeError(f"gradient length {g.shape[-1]} != sketch output dim {p.d}")
    return g[..., p.h] * p.s


def _check_pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[-1] != b.shape[-1]:
        raise ShapeError(f"length mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    return a, b


def circ_conv_naive(a, b) -> np.ndarray:
    """O(d^2) circular convolution ``out[j] = sum_i a[i] b[(j - i) mod d]``."""
    a, b = _check_pair(a, b)
    if a.ndim != 1 or b.ndim != 1:
        raise ShapeError("circ_conv_naive takes 1-d vectors")
    d = a.shape[0]
    idx = np.arange(d)
    # circulant matrix C[j, i] = b[(j - i) mod d]
    return b[(idx[:, None] - idx[None, :]) % d] @ a


def circ_conv_fast(a, b) -> np.ndarray:
    """Circular convolution along the last axis via real FFTs; any length d >= 1."""
    a, b = _check_pair(a, b)
    d = a.shape[-1]
    return np.fft.irfft(np.fft.rfft(a, axis=-1) * np.fft.rfft(b, axis=-1), n=d, axis=-1)


def circ_corr(a, b) -> np.ndarray:
    """Circular cross-correlation ``out[j] = sum_i a[i] b[(i - j) mod d]``.

    This is the adjoint of convolution by ``b``:
    ``<conv(x, b), g> == <x, circ_corr(g, b)>``.
    """
    a, b = _check_pair(a, b)
    d = a.shape[-1]
    fa = np.fft.rfft(a, axis=-1)
    fb = np.fft.rfft(b, axis=-1)
    return np.fft.irfft(fa * np.conj(fb), n=d, axis=-1)
