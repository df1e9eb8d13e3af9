# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_fallback`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, M_PI

cnp.import_array()

DEF TAPS = 64
DEF LEFT = 31


def convolve_direct(x, h):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], m = hv.shape[0], i, k
    out = np.zeros(n + m - 1)
    cdef double[::1] y = out
    cdef double hk
    with nogil:
        for k in range(m):
            hk = hv[k]
            if hk == 0.0:
                continue
            for i in range(n):
                y[i + k] += hk * xv[i]
    return out


def polyphase_resample(x, table, long up, long down, Py_ssize_t out_len):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] tv = np.ascontiguousarray(table, dtype=np.float64)
    cdef Py_ssize_t nx = xv.shape[0], n, j, idx
    cdef long long pos, anchor, phase
    out = np.zeros(out_len)
    cdef double[::1] y = out
    cdef double acc
    with nogil:
        for n in range(out_len):
            pos = <long long>n * down
            anchor = pos // up
            phase = pos % up
            acc = 0.0
            for j in range(TAPS):
                idx = anchor + j - LEFT
                if 0 <= idx < nx:
                    acc += tv[phase, j] * xv[idx]
            y[n] = acc
    return out


def diag_gauss_logpdf(X, means, variances):
    cdef double[:, ::1] xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[:, ::1] mv = np.ascontiguousarray(means, dtype=np.float64)
    cdef double[:, ::1] vv = np.ascontiguousarray(variances, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], d = xv.shape[1], kk = mv.shape[0]
    cdef Py_ssize_t i, k, j
    out = np.empty((n, kk))
    cdef double[:, ::1] lp = out
    const_arr = np.empty(kk)
    cdef double[::1] const = const_arr
    inv_arr = np.empty((kk, d))
    cdef double[:, ::1] inv = inv_arr
    cdef double acc, diff
    with nogil:
        for k in range(kk):
            acc = d * log(2.0 * M_PI)
            for j in range(d):
                acc += log(vv[k, j])
                inv[k, j] = 1.0 / vv[k, j]
            const[k] = -0.5 * acc
        for i in range(n):
            for k in range(kk):
                acc = 0.0
                for j in range(d):
                    diff = xv[i, j] - mv[k, j]
                    acc += diff * diff * inv[k, j]
                lp[i, k] = const[k] - 0.5 * acc
    return out
