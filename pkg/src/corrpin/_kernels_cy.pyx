# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels for the pattern-space hot loops.

Contracts match corrpin._kernels_py; see that module for the index
algebra.  All loops stream sequentially over the 2^q state vectors.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def matvec_right(double[::1] v, double[::1] diag, double[::1] kt,
                 double tail, int q, out=None):
    cdef Py_ssize_t dim = 1 << q
    if out is None:
        out = np.empty(dim)
    u_arr = np.empty(dim)
    tmp_arr = np.empty(dim >> 1 if q > 0 else 1)
    cdef double[::1] o = out
    cdef double[::1] u = u_arr
    cdef double[::1] tmp = tmp_arr
    cdef Py_ssize_t i, l, r, c, cols, off, base
    cdef double k, t0
    for i in range(dim):
        u[i] = diag[i] * v[i]
    t0 = tail * u[0]
    for i in range(dim):
        o[i] = t0
    for l in range(1, q + 1):
        cols = dim >> l
        base = 1 << (l - 1)
        k = kt[l - 1]
        for c in range(cols):
            tmp[c] = k * u[(c << l) | base]
        for r in range(1 << l):
            off = r * cols
            for c in range(cols):
                o[off + c] += tmp[c]
    return out


def matvec_left(double[::1] u, double[::1] diag, double[::1] kt,
                double tail, int q, out=None):
    cdef Py_ssize_t dim = 1 << q
    if out is None:
        out = np.empty(dim)
    grp_arr = np.empty(dim >> 1 if q > 0 else 1)
    cdef double[::1] o = out
    cdef double[::1] grp = grp_arr
    cdef Py_ssize_t i, l, r, c, cols, off, base
    cdef double k, tot
    tot = 0.0
    for i in range(dim):
        o[i] = 0.0
        tot += u[i]
    o[0] = tail * tot
    for l in range(1, q + 1):
        cols = dim >> l
        base = 1 << (l - 1)
        k = kt[l - 1]
        for c in range(cols):
            grp[c] = 0.0
        for r in range(1 << l):
            off = r * cols
            for c in range(cols):
                grp[c] += u[off + c]
        for c in range(cols):
            o[(c << l) | base] += k * grp[c]
    for i in range(dim):
        o[i] *= diag[i]
    return out


def dp_scatter(double[::1] out, double[::1] src, double coef,
               int l, int q, bint set_bit):
    cdef Py_ssize_t dim = 1 << q
    cdef Py_ssize_t cols = dim >> l
    cdef Py_ssize_t base = (1 << (l - 1)) if set_bit else 0
    grp_arr = np.zeros(cols)
    cdef double[::1] grp = grp_arr
    cdef Py_ssize_t r, c, off
    for r in range(1 << l):
        off = r * cols
        for c in range(cols):
            grp[c] += src[off + c]
    for c in range(cols):
        out[(c << l) | base] += coef * grp[c]
    return out
