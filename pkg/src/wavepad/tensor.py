"""Thin, shape-checked helpers over :class:`numpy.ndarray`.

Every array in the package is a plain ndarray in row-major ``(N, C, H, W)``
order, rank 1 to 4. These helpers exist for the places where a mismatch
should fail loudly with both shapes in the message instead of broadcasting.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

MAX_RANK = 4


class ShapeError(ValueError):
    """Raised when array shapes do not conform."""


def _check_shape(shape: Sequence[int]) -> tuple[int, ...]:
    shape = tuple(int(s) for s in shape)
    if not 1 <= len(shape) <= MAX_RANK:
        raise ShapeError(f"rank must be in [1, {MAX_RANK}], got shape {shape}")
    if any(s <= 0 for s in shape):
        raise ShapeError(f"dimensions must be positive, got shape {shape}")
    return shape


def zeros(shape: Sequence[int], dtype=np.float64) -> np.ndarray:
    return np.zeros(_check_shape(shape), dtype=dtype)


def from_values(shape: Sequence[int], values: Iterable[float], dtype=np.float64) -> np.ndarray:
    """Build an array of ``shape`` from a flat row-major sequence of values."""
    shape = _check_shape(shape)
    flat = np.asarray(list(values), dtype=dtype).ravel()
    if flat.size != int(np.prod(shape)):
        raise ShapeError(f"{flat.size} values cannot fill shape {shape}")
    return flat.reshape(shape)


def _same_shape(a: np.ndarray, b: np.ndarray, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _same_shape(a, b, "add")
    return a + b


def sub(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _same_shape(a, b, "sub")
    return a - b


def mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _same_shape(a, b, "mul")
    return a * b


def scale(a: np.ndarray, alpha: float) -> np.ndarray:
    return a * alpha


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs rank-2 operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")
    return a @ b


def max_abs_diff(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    _same_shape(a, b, "max_abs_diff")
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a.astype(np.float64) - b.astype(np.float64))))
