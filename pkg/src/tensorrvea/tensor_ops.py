"""Dense 2-D kernels used by the tensorized selection and variation operators.

Tensors are plain ``float64`` numpy arrays of rank 2. The kernels here never
broadcast implicitly: callers expand shapes with :func:`repeat_col` and
:func:`repeat_row`. Reductions (``matmul``, ``row_norms``) accumulate in a
fixed sequential order per output element, so splitting rows across lanes
never changes a single bit of the result.
"""

from __future__ import annotations

import contextlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterator

import numpy as np

Tensor2D = np.ndarray

_LANES = 1


class ShapeError(ValueError):
    """Raised when tensor shapes violate a kernel's contract."""


def set_lanes(n: int) -> None:
    """Set the number of worker threads used by row/column-partitioned kernels."""
    global _LANES
    if n < 1:
        raise ValueError(f"lanes must be >= 1, got {n}")
    _LANES = int(n)


def get_lanes() -> int:
    return _LANES


@contextlib.contextmanager
def lanes(n: int) -> Iterator[None]:
    previous = _LANES
    set_lanes(n)
    try:
        yield
    finally:
        set_lanes(previous)


def _blocks(total: int, parts: int) -> list[tuple[int, int]]:
    parts = max(1, min(parts, total))
    edges = [total * i // parts for i in range(parts + 1)]
    return [(edges[i], edges[i + 1]) for i in range(parts) if edges[i] < edges[i + 1]]


def map_blocks(fn: Callable[[int, int], np.ndarray], total: int, axis: int = 0) -> np.ndarray:
    """Evaluate ``fn(lo, hi)`` over contiguous blocks of ``range(total)`` and concatenate.

    ``fn`` must compute each output slice independently of the others; the
    block layout then only affects scheduling, never values.
    """
    blocks = _blocks(total, _LANES)
    if len(blocks) <= 1:
        return fn(0, total)
    with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
        parts = list(pool.map(lambda b: fn(*b), blocks))
    return np.concatenate(parts, axis=axis)


def as_tensor(a) -> Tensor2D:
    t = np.asarray(a, dtype=np.float64)
    if t.ndim != 2:
        raise ShapeError(f"expected a 2-D tensor, got shape {t.shape}")
    return t


def _same_shape(a: Tensor2D, b: Tensor2D) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")


def matmul(a, b) -> Tensor2D:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner dimensions differ: {a.shape} x {b.shape}")
    k = a.shape[1]

    def block(lo: int, hi: int) -> np.ndarray:
        out = np.zeros((hi - lo, b.shape[1]))
        for j in range(k):
            out += a[lo:hi, j : j + 1] * b[j : j + 1, :]
        return out

    return map_blocks(block, a.shape[0])


def row_norms(a) -> Tensor2D:
    """Euclidean norm of each row, shape ``(n, 1)``."""
    a = as_tensor(a)

    def block(lo: int, hi: int) -> np.ndarray:
        acc = np.zeros(hi - lo)
        for j in range(a.shape[1]):
            col = a[lo:hi, j]
            acc += col * col
        return np.sqrt(acc)[:, None]

    return map_blocks(block, a.shape[0])


def row_min_argmin(a) -> tuple[Tensor2D, np.ndarray]:
    """Per-row minimum and its column; ties go to the lowest column index."""
    a = as_tensor(a)
    if a.shape[1] < 1:
        raise ShapeError("row_min_argmin needs at least one column")
    idx = np.argmin(a, axis=1)
    return a[np.arange(a.shape[0]), idx][:, None], idx


def col_min(a) -> Tensor2D:
    a = as_tensor(a)
    return a.min(axis=0, keepdims=True)


def col_max(a) -> Tensor2D:
    a = as_tensor(a)
    return a.max(axis=0, keepdims=True)


def repeat_col(v, r: int) -> Tensor2D:
    """Replicate an ``(n, 1)`` column ``r`` times into ``(n, r)``."""
    v = np.asarray(v)
    if v.ndim != 2 or v.shape[1] != 1:
        raise ShapeError(f"repeat_col expects (n, 1), got {v.shape}")
    if r < 1:
        raise ShapeError("repeat count must be >= 1")
    return np.repeat(v, r, axis=1)


def repeat_row(v, n: int) -> Tensor2D:
    """Replicate a ``(1, r)`` row ``n`` times into ``(n, r)``."""
    v = np.asarray(v)
    if v.ndim != 2 or v.shape[0] != 1:
        raise ShapeError(f"repeat_row expects (1, r), got {v.shape}")
    if n < 1:
        raise ShapeError("repeat count must be >= 1")
    return np.repeat(v, n, axis=0)


def sgn(a) -> Tensor2D:
    """Two-valued sign: 1 where ``a >= 0``, else -1."""
    a = np.asarray(a, dtype=np.float64)
    return np.where(a >= 0, 1.0, -1.0)


def signum(a) -> Tensor2D:
    """Three-valued sign with ``signum(0) = 0``."""
    return np.sign(np.asarray(a, dtype=np.float64))


def step(a) -> Tensor2D:
    """Heaviside step with ``step(0) = 1``."""
    a = np.asarray(a, dtype=np.float64)
    return np.where(a >= 0, 1.0, 0.0)


def arccos(a) -> Tensor2D:
    a = np.asarray(a, dtype=np.float64)
    return np.arccos(np.clip(a, -1.0, 1.0))


def clamp(a, lo, hi) -> Tensor2D:
    a = as_tensor(a)
    lo, hi = np.asarray(lo, dtype=np.float64), np.asarray(hi, dtype=np.float64)
    if lo.ndim == 2:
        _same_shape(a, lo)
    if hi.ndim == 2:
        _same_shape(a, hi)
    return np.minimum(np.maximum(a, lo), hi)


def power(a, b) -> Tensor2D:
    a = as_tensor(a)
    b = np.asarray(b, dtype=np.float64)
    if b.ndim == 2:
        _same_shape(a, b)
    frac = b != np.round(b)
    if np.any((a < 0) & frac):
        raise ValueError("negative base with fractional exponent")
    return np.power(a, b)


_UNARY = {"abs": np.abs, "sgn": sgn, "sign": signum, "step": step, "arccos": arccos}
_BINARY = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
    "div": np.divide,
    "pow": power,
}


def elementwise(op: str, a, b=None) -> Tensor2D:
    """Dispatch a named elementwise op. Binary ops require equal shapes."""
    a = as_tensor(a)
    if op in _UNARY:
        if b is not None:
            raise TypeError(f"{op} is unary")
        return _UNARY[op](a)
    if op not in _BINARY:
        raise KeyError(f"unknown elementwise op {op!r}")
    if b is None:
        raise TypeError(f"{op} is binary")
    if np.ndim(b) == 0:
        b = np.full(a.shape, float(b))
    b = as_tensor(b)
    _same_shape(a, b)
    return _BINARY[op](a, b)


def masked_replace(a, predicate: Callable[[np.ndarray], np.ndarray], replacement: float) -> Tensor2D:
    a = as_tensor(a)
    mask = np.asarray(predicate(a), dtype=bool)
    return np.where(mask, replacement, a)


def gather_rows(a, idx) -> Tensor2D:
    """Copy rows of ``a`` by index; the sentinel -1 gathers row 0 as a placeholder."""
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size and (idx.max() >= a.shape[0] or idx.min() < -1):
        raise IndexError(f"gather index out of range for {a.shape[0]} rows")
    return a[np.where(idx < 0, 0, idx)]


def identity(n: int) -> Tensor2D:
    return np.eye(n)
