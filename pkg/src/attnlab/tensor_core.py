"""Dense float64 matrices and the stable normalization primitives.

A "matrix" throughout the package is a 2-D, C-contiguous ``numpy.float64``
array. Masks are boolean arrays of the same shape where ``True`` marks an
entry that takes part in the normalization; masked entries contribute
nothing to any sum and come out exactly 0.
"""
from __future__ import annotations

import numpy as np

from . import _backend


def as_matrix(data, name: str = "matrix") -> np.ndarray:
    """Coerce ``data`` to a finite 2-D float64 matrix, raising ValueError otherwise."""
    m = np.ascontiguousarray(data, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and column, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def _as_mask(mask, shape):
    if mask is None:
        return None
    mk = np.asarray(mask)
    if mk.shape != shape:
        raise ValueError(f"mask shape {mk.shape} does not match matrix shape {shape}")
    return np.ascontiguousarray(mk, dtype=np.uint8)


def matrix_to_json(m) -> dict:
    m = np.asarray(m, dtype=np.float64)
    return {"rows": int(m.shape[0]), "cols": int(m.shape[1]), "data": [float(v) for v in m.ravel()]}


def matrix_from_json(obj) -> np.ndarray:
    try:
        rows, cols, data = int(obj["rows"]), int(obj["cols"]), obj["data"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"matrix JSON needs 'rows', 'cols' and 'data': {exc}") from None
    if rows < 1 or cols < 1:
        raise ValueError(f"matrix JSON has non-positive shape {rows}x{cols}")
    if len(data) != rows * cols:
        raise ValueError(f"matrix JSON data has {len(data)} entries, expected {rows}x{cols}={rows * cols}")
    return as_matrix(np.asarray(data, dtype=np.float64).reshape(rows, cols))


def mask_from_json(obj) -> np.ndarray:
    """Masks share the matrix schema; nonzero entries are kept."""
    return matrix_from_json(obj) != 0.0


def matmul(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"cannot multiply shapes {a.shape} and {b.shape}")
    return a @ b


def row_softmax(z, mask=None) -> np.ndarray:
    """Softmax along each row, max-subtracted; raises on a fully masked row."""
    z = as_matrix(z, "logits")
    return _backend.kernels.row_softmax(z, _as_mask(mask, z.shape))


def col_softmax(z, mask=None) -> np.ndarray:
    """Softmax along each column, max-subtracted; raises on a fully masked column."""
    z = as_matrix(z, "logits")
    return _backend.kernels.col_softmax(z, _as_mask(mask, z.shape))


def _nonneg(m, name):
    m = as_matrix(m, name)
    if np.any(m < 0):
        raise ValueError(f"{name} has negative entries")
    return m


def row_normalize(m) -> np.ndarray:
    return _backend.kernels.row_normalize(_nonneg(m, "matrix"))


def col_normalize(m) -> np.ndarray:
    return _backend.kernels.col_normalize(_nonneg(m, "matrix"))
