# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled line smoothing kernel. Same contract as ``_kernels_py.smooth_lines``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, exp, log, expm1, log1p, fabs

cnp.import_array()


cdef void _stencil(Py_ssize_t n, double p, Py_ssize_t* idx, double* wt) noexcept nogil:
    """Resolve the interpolant at fractional index ``p`` into 4 (index, weight) pairs."""
    cdef Py_ssize_t j, a
    cdef double t, t2, t3, w0, w1, w2, w3
    for a in range(4):
        idx[a] = 0
        wt[a] = 0.0
    if n == 1:
        wt[0] = 1.0
        return
    if p < 0.0:
        idx[0] = 0; wt[0] = 1.0 - p
        idx[1] = 1; wt[1] = p
        return
    if p > n - 1:
        t = p - (n - 1)
        idx[0] = n - 1; wt[0] = 1.0 + t
        idx[1] = n - 2; wt[1] = -t
        return
    j = <Py_ssize_t> floor(p)
    if j > n - 2:
        j = n - 2
    t = p - j
    t2 = t * t
    t3 = t2 * t
    w0 = -0.5 * t3 + t2 - 0.5 * t
    w1 = 1.5 * t3 - 2.5 * t2 + 1.0
    w2 = -1.5 * t3 + 2.0 * t2 + 0.5 * t
    w3 = 0.5 * t3 - 0.5 * t2
    idx[1] = j; wt[1] = w1
    idx[2] = j + 1; wt[2] = w2
    if j - 1 >= 0:
        idx[0] = j - 1; wt[0] = w0
    else:
        # ghost -1 = 2 f_0 - f_1; here j == 0
        wt[1] += 2.0 * w0
        wt[2] -= w0
    if j + 2 <= n - 1:
        idx[3] = j + 2; wt[3] = w3
    else:
        # ghost n = 2 f_{n-1} - f_{n-2}; here j + 1 == n - 1
        wt[2] += 2.0 * w3
        wt[1] -= w3


def smooth_lines(f, offsets, weights, double m):
    cdef double[:, ::1] fv = np.ascontiguousarray(f, dtype=np.float64)
    cdef double[::1] off = np.ascontiguousarray(offsets, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t lines = fv.shape[0], n = fv.shape[1], nk = off.shape[0]
    out = np.empty((lines, n), dtype=np.float64)
    cdef double[:, ::1] ov = out
    st_idx_arr = np.empty((n, nk, 4), dtype=np.intp)
    st_wt_arr = np.empty((n, nk, 4), dtype=np.float64)
    cdef Py_ssize_t[:, :, ::1] st_idx = st_idx_arr
    cdef double[:, :, ::1] st_wt = st_wt_arr
    cdef double[::1] vals = np.empty(nk, dtype=np.float64)
    cdef double[::1] logw = np.log(np.maximum(np.asarray(w), 1e-300))
    cdef Py_ssize_t r, i, k
    cdef double c, acc
    # expm1/log1p keep full relative accuracy as m -> 0; otherwise the weights
    # enter the shift so a maximum on a negligible-weight node cannot cancel
    cdef bint small_m = fabs(m) < 1e-2
    cdef const double* row
    cdef Py_ssize_t* ip
    cdef double* wp
    with nogil:
        for i in range(n):
            for k in range(nk):
                _stencil(n, i + off[k], &st_idx[i, k, 0], &st_wt[i, k, 0])
        for r in range(lines):
            row = &fv[r, 0]
            for i in range(n):
                for k in range(nk):
                    ip = &st_idx[i, k, 0]
                    wp = &st_wt[i, k, 0]
                    vals[k] = (wp[0] * row[ip[0]] + wp[1] * row[ip[1]]
                               + wp[2] * row[ip[2]] + wp[3] * row[ip[3]])
                if m == 0.0:
                    acc = 0.0
                    for k in range(nk):
                        acc = acc + w[k] * vals[k]
                    ov[r, i] = acc
                    continue
                if small_m:
                    c = vals[0]
                    for k in range(1, nk):
                        if (m > 0.0 and vals[k] > c) or (m < 0.0 and vals[k] < c):
                            c = vals[k]
                    acc = 0.0
                    for k in range(nk):
                        acc = acc + w[k] * expm1(m * (vals[k] - c))
                    ov[r, i] = c + log1p(acc) / m
                else:
                    c = m * vals[0] + logw[0]
                    for k in range(1, nk):
                        if m * vals[k] + logw[k] > c:
                            c = m * vals[k] + logw[k]
                    acc = 0.0
                    for k in range(nk):
                        acc = acc + exp(m * vals[k] + logw[k] - c)
                    ov[r, i] = (c + log(acc)) / m
    return out
