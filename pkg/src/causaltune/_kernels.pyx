# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the spectral hot loop and metric accumulation.

Signatures mirror :mod:`causaltune._fallback` exactly; :mod:`causaltune._core`
picks one of the two at import time.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline void _axpy(double a, const double* x, double* y, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(n):
        y[i] += a * x[i]


def sep2d(x, mh, mw):
    """out[b, u, v, k] = sum_h sum_w mh[u, h] * mw[v, w] * x[b, h, w, k]."""
    cdef const double[:, :, :, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[:, ::1] a = np.ascontiguousarray(mh, dtype=np.float64)
    cdef const double[:, ::1] bm = np.ascontiguousarray(mw, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], H = xv.shape[1], W = xv.shape[2], C = xv.shape[3]
    cdef Py_ssize_t U = a.shape[0], V = bm.shape[0]
    if a.shape[1] != H or bm.shape[1] != W:
        raise ValueError("transform matrix does not match input grid")
    out = np.zeros((n, U, V, C), dtype=np.float64)
    if n == 0 or U == 0 or V == 0 or C == 0 or H == 0 or W == 0:
        return out
    tmp = np.empty((U, W, C), dtype=np.float64)
    cdef double[:, :, :, ::1] ov = out
    cdef double[:, :, ::1] tv = tmp
    cdef Py_ssize_t b, u, v, h, w
    cdef Py_ssize_t row = W * C
    cdef double coef
    with nogil:
        for b in range(n):
            # rows first: tmp[u] = sum_h a[u, h] x[b, h], each a contiguous W*C axpy
            for u in range(U):
                for w in range(row):
                    (&tv[u, 0, 0])[w] = 0.0
                for h in range(H):
                    coef = a[u, h]
                    if coef != 0.0:
                        _axpy(coef, &xv[b, h, 0, 0], &tv[u, 0, 0], row)
            # then columns: out[b, u, v] = sum_w mw[v, w] tmp[u, w]
            for u in range(U):
                for v in range(V):
                    for w in range(W):
                        coef = bm[v, w]
                        if coef != 0.0:
                            _axpy(coef, &tv[u, w, 0], &ov[b, u, v, 0], C)
    return out


def confusion(pred, gt, int num_classes):
    """K x K count matrix, rows = ground truth, columns = prediction."""
    cdef const long long[::1] p = np.ascontiguousarray(pred, dtype=np.int64).ravel()
    cdef const long long[::1] g = np.ascontiguousarray(gt, dtype=np.int64).ravel()
    if p.shape[0] != g.shape[0]:
        raise ValueError("prediction and ground truth differ in size")
    out = np.zeros((num_classes, num_classes), dtype=np.int64)
    cdef long long[:, ::1] cm = out
    cdef Py_ssize_t i, n = p.shape[0]
    cdef long long a, b
    for i in range(n):
        a = g[i]
        b = p[i]
        if a < 0 or a >= num_classes or b < 0 or b >= num_classes:
            raise ValueError("label out of range")
        cm[a, b] += 1
    return out
