"""Binary grid files and plain-text label tables.

Grid file layout (all little-endian)::

    offset  size  field
    0       4     magic  b"CBPF"
    4       4     version (uint32) = 1
    8       16    n, h, w, c (uint32 each)
    24      ...   n*h*w*c float32 values, sample/row/col/channel order
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from .core import (
    FormatError,
    LocalDescriptorGrid,
    ShapeError,
    TruncationError,
    ValidationError,
)

MAGIC = b"CBPF"
VERSION = 1
_HEADER = struct.Struct("<4sIIIII")
HEADER_SIZE = _HEADER.size  # 24


def write_grid(path, grid: LocalDescriptorGrid) -> None:
    header = _HEADER.pack(MAGIC, VERSION, grid.n, grid.h, grid.w, grid.c)
    payload = grid.data.astype("<f4", copy=False).tobytes(order="C")
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise OSError(f"cannot write grid file {os.fspath(path)!r}: {exc}") from exc


def read_grid(path) -> LocalDescriptorGrid:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read grid file {os.fspath(path)!r}: {exc}") from exc

    if len(raw) < HEADER_SIZE:
        raise TruncationError(f"{path}: file shorter than the {HEADER_SIZE}-byte header")
    magic, version, n, h, w, c = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if 0 in (n, h, w, c):
        raise ValidationError(f"{path}: zero dimension in header (n={n}, h={h}, w={w}, c={c})")
    expected = n * h * w * c * 4
    got = len(raw) - HEADER_SIZE
    if got != expected:
        raise TruncationError(f"{path}: payload is {got} bytes, header declares {expected}")

    values = np.frombuffer(raw, dtype="<f4", offset=HEADER_SIZE)
    if not np.all(np.isfinite(values)):
        raise ValidationError(f"{path}: payload contains NaN or Inf")
    return LocalDescriptorGrid(values.astype(np.float64).reshape(n, h, w, c))


def write_pooled(path, features) -> None:
    """Store an ``(n, dim)`` matrix as a grid file with ``h = w = 1``."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ShapeError(f"expected (n, dim) features, got shape {features.shape}")
    write_grid(path, LocalDescriptorGrid(features[:, None, None, :]))


def read_pooled(path) -> np.ndarray:
    grid = read_grid(path)
    return grid.data.reshape(grid.n, -1)


@dataclass(frozen=True)
class LabelTable:
    """Pairs of ``(sample_index, class_id)`` in file order."""

    indices: np.ndarray
    class_ids: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        cls = np.asarray(self.class_ids, dtype=np.int64).reshape(-1)
        if idx.shape != cls.shape:
            raise ShapeError("indices and class_ids must have equal length")
        if np.any(idx < 0) or np.any(cls < 0):
            raise ValidationError("label table entries must be non-negative")
        if len(np.unique(idx)) != len(idx):
            raise ValidationError("duplicate sample index in label table")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "class_ids", cls)

    @classmethod
    def from_labels(cls, labels) -> LabelTable:
        labels = np.asarray(labels, dtype=np.int64)
        return cls(np.arange(len(labels)), labels)

    def __len__(self) -> int:
        return len(self.indices)

    def rows(self) -> list[tuple[int, int]]:
        return list(zip(self.indices.tolist(), self.class_ids.tolist()))

    @property
    def num_classes(self) -> int:
        return int(self.class_ids.max()) + 1 if len(self) else 0

    def validate(self, n: int | None = None, k: int | None = None) -> None:
        if n is not None and len(self) and self.indices.max() >= n:
            raise ValidationError(f"sample index {self.indices.max()} out of range for n={n}")
        if k is not None and len(self) and self.class_ids.max() >= k:
            raise ValidationError(f"class id {self.class_ids.max()} out of range for k={k}")

    def dense(self, n: int) -> np.ndarray:
        """Label vector of length ``n``; every sample must be labelled."""
        self.validate(n=n)
        if len(self) != n:
            raise ValidationError(f"label table covers {len(self)} of {n} samples")
        out = np.empty(n, dtype=np.int64)
        out[self.indices] = self.class_ids
        return out


def read_labels(path, n: int | None = None, k: int | None = None) -> LabelTable:
    """Parse ``index,label`` lines; ``#`` lines and blank lines are skipped.

    Errors name the offending 1-based line number.
    """
    indices, labels, seen = [], [], {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = [p.strip() for p in text.split(",")]
            if len(parts) != 2:
                raise ValidationError(f"{path}:{lineno}: expected 'index,label', got {text!r}")
            try:
                idx, lab = int(parts[0]), int(parts[1])
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: non-numeric field in {text!r}") from None
            if idx < 0 or lab < 0:
                raise ValidationError(f"{path}:{lineno}: negative value in {text!r}")
            if idx in seen:
                raise ValidationError(
                    f"{path}:{lineno}: duplicate index {idx} (first seen on line {seen[idx]})"
                )
            if n is not None and idx >= n:
                raise ValidationError(f"{path}:{lineno}: index {idx} out of range for n={n}")
            if k is not None and lab >= k:
                raise ValidationError(f"{path}:{lineno}: label {lab} out of range for k={k}")
            seen[idx] = lineno
            indices.append(idx)
            labels.append(lab)
    return LabelTable(np.array(indices, dtype=np.int64), np.array(labels, dtype=np.int64))


def write_labels(path, table: LabelTable) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for idx, lab in table.rows():
            fh.write(f"{idx},{lab}\n")
