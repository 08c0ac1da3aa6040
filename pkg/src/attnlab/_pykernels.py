"""Pure numpy normalization kernels.

Reference fallback for :mod:`attnlab._ckernels`; both modules expose the same
four functions with the same argument conventions and error messages.
Inputs are assumed validated by :mod:`attnlab.tensor_core` (C-contiguous
float64, finite, ``mask`` a uint8 array of the same shape or None).
"""
import numpy as np


def row_softmax(z, mask=None):
    if mask is not None:
        z = np.where(mask.astype(bool), z, -np.inf)
    mx = z.max(axis=1, keepdims=True)
    bad = np.flatnonzero(np.isneginf(mx[:, 0]))
    if bad.size:
        raise ValueError(f"row {bad[0]} is fully masked")
    e = np.exp(z - mx)
    return e / e.sum(axis=1, keepdims=True)


def col_softmax(z, mask=None):
    if mask is not None:
        z = np.where(mask.astype(bool), z, -np.inf)
    mx = z.max(axis=0, keepdims=True)
    bad = np.flatnonzero(np.isneginf(mx[0]))
    if bad.size:
        raise ValueError(f"column {bad[0]} is fully masked")
    e = np.exp(z - mx)
    return e / e.sum(axis=0, keepdims=True)


def row_normalize(m):
    s = m.sum(axis=1, keepdims=True)
    bad = np.flatnonzero(s[:, 0] <= 0.0)
    if bad.size:
        raise ValueError(f"row {bad[0]} has zero sum")
    return m / s


def col_normalize(m):
    s = m.sum(axis=0, keepdims=True)
    bad = np.flatnonzero(s[0] <= 0.0)
    if bad.size:
        raise ValueError(f"column {bad[0]} has zero sum")
    return m / s
