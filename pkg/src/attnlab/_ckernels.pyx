"""Compiled normalization kernels (see _pykernels for the numpy twin)."""
import numpy as np

from libc.math cimport INFINITY


def row_softmax(const double[:, ::1] z, const unsigned char[:, ::1] mask=None):
    cdef Py_ssize_t n = z.shape[0], m = z.shape[1], i, j
    cdef bint masked = mask is not None
    cdef double mx, s
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    for i in range(n):
        mx = -INFINITY
        for j in range(m):
            if (not masked or mask[i, j]) and z[i, j] > mx:
                mx = z[i, j]
        if mx == -INFINITY:
            raise ValueError(f"row {i} is fully masked")
        for j in range(m):
            o[i, j] = z[i, j] - mx if (not masked or mask[i, j]) else -INFINITY
    # one vectorized exp over the whole buffer beats per-element libm calls
    np.exp(out, out=out)
    for i in range(n):
        s = 0.0
        for j in range(m):
            s += o[i, j]
        for j in range(m):
            o[i, j] /= s
    return out


def col_softmax(const double[:, ::1] z, const unsigned char[:, ::1] mask=None):
    cdef Py_ssize_t n = z.shape[0], m = z.shape[1], i, j
    cdef bint masked = mask is not None
    out = np.empty((n, m), dtype=np.float64)
    mx_arr = np.full(m, -INFINITY)
    s_arr = np.zeros(m)
    cdef double[:, ::1] o = out
    cdef double[::1] mx = mx_arr
    cdef double[::1] s = s_arr
    # row-major sweeps keep memory access contiguous
    for i in range(n):
        for j in range(m):
            if (not masked or mask[i, j]) and z[i, j] > mx[j]:
                mx[j] = z[i, j]
    for j in range(m):
        if mx[j] == -INFINITY:
            raise ValueError(f"column {j} is fully masked")
    for i in range(n):
        for j in range(m):
            o[i, j] = z[i, j] - mx[j] if (not masked or mask[i, j]) else -INFINITY
    np.exp(out, out=out)
    for i in range(n):
        for j in range(m):
            s[j] += o[i, j]
    for i in range(n):
        for j in range(m):
            o[i, j] /= s[j]
    return out


def row_normalize(const double[:, ::1] a):
    cdef Py_ssize_t n = a.shape[0], m = a.shape[1], i, j
    cdef double s
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    for i in range(n):
        s = 0.0
        for j in range(m):
            s += a[i, j]
        if not s > 0.0:
            raise ValueError(f"row {i} has zero sum")
        for j in range(m):
            o[i, j] = a[i, j] / s
    return out


def col_normalize(const double[:, ::1] a):
    cdef Py_ssize_t n = a.shape[0], m = a.shape[1], i, j
    out = np.empty((n, m), dtype=np.float64)
    s_arr = np.zeros(m)
    cdef double[:, ::1] o = out
    cdef double[::1] s = s_arr
    for i in range(n):
        for j in range(m):
            s[j] += a[i, j]
    for j in range(m):
        if not s[j] > 0.0:
            raise ValueError(f"column {j} has zero sum")
    for i in range(n):
        for j in range(m):
            o[i, j] = a[i, j] / s[j]
    return out
