# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel backend.

Signature-identical twin of _kernels_py. Matrix products go through BLAS
dgemm; elementwise forward/adjoint kernels are fused single-pass loops over
2-D C-contiguous float64 buffers.
"""

import numpy as np

from libc.math cimport cos, fabs, log, log10, pow, sin, sqrt
from scipy.linalg.cython_blas cimport dgemm

NAME = "cython"

cdef double _LN10 = log(10.0)
cdef double _CLAMP = 1e-30

LN10 = _LN10
LOG10_CLAMP = _CLAMP


def gemm(double[:, ::1] a, double[:, ::1] b, bint ta=False, bint tb=False,
         out=None, bint accumulate=False):
    """out = op(a) @ op(b) for row-major buffers, via Fortran dgemm with the
    operand swap that makes leading dimensions line up."""
    cdef int m, n, k, lda, ldb, ldc
    cdef double alpha = 1.0
    cdef double beta = 1.0 if accumulate else 0.0
    cdef char ta_c = b'T' if ta else b'N'
    cdef char tb_c = b'T' if tb else b'N'
    cdef double[:, ::1] c

    if ta:
        m = <int> a.shape[1]
        k = <int> a.shape[0]
    else:
        m = <int> a.shape[0]
        k = <int> a.shape[1]
    if tb:
        n = <int> b.shape[0]
    else:
        n = <int> b.shape[1]
    lda = <int> a.shape[1]
    ldb = <int> b.shape[1]
    ldc = n

    if out is None:
        out = np.empty((m, n))
    c = out
    dgemm(&tb_c, &ta_c, &n, &m, &k, &alpha, &b[0, 0], &ldb, &a[0, 0], &lda,
          &beta, &c[0, 0], &ldc)
    return out


def add(double[:, ::1] a, double[:, ::1] b):
    cdef Py_ssize_t i, j, n = a.shape[0], m = a.shape[1]
    out = np.empty((n, m))
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(m):
            o[i, j] = a[i, j] + b[i, j]
    return out


def sub(double[:, ::1] a, double[:, ::1] b):
    cdef Py_ssize_t i, j, n = a.shape[0], m = a.shape[1]
    out = np.empty((n, m))
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(m):
            o[i, j] = a[i, j] - b[i, j]
    return out


def mul(double[:, ::1] a, double[:, ::1] b):
    cdef Py_ssize_t i, j, n = a.shape[0], m = a.shape[1]
    out = np.empty((n, m))
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(m):
            o[i, j] = a[i, j] * b[i, j]
    return out


def div(double[:, ::1] a, double[:, ::1] b):
    cdef Py_ssize_t i, j, n = a.shape[0], m = a.shape[1]
    out = np.empty((n, m))
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(m):
            o[i, j] = a[i, j] / b[i, j]
    return out


def add_s(double[:, ::1] a, double c):
    cdef Py_ssize_t i, j, n = a.shape[0], m = a.shape[1]
    out = np.empty((n, m))
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(m):
            o[i, j] = a[i, j] + c
    return out


def mul_s(double[:, ::1] a, double c):
    cdef Py_ssize_t i, j, n = a.shape[0], m = a.shape[1]
    out = np.empty((n, m))
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(m):
            o[i, j] = a[i, j] * c
    return out


def rsub_s(double c, double[:, ::1] a):
    cdef Py_ssize_t i, j, n = a.shape[0], m = a.shape[1]
    out = np.empty((n, m))
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(m):
            o[i, j] = c - a[i, j]
    return out


def rdiv_s(double c, double[:, ::1] a):
    cdef Py_ssize_t i, j, n = a.shape[0], m = a.shape[1]
    out = np.empty((n, m))
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(m):
            o[i, j] = c / a[i, j]
    return out


def pow_s(double[:, ::1] a, double c):
    cdef Py_ssize_t i, j, n = a.shape[0], m = a.shape[1]
    out = np.empty((n, m))
    cdef double[:, ::1] o = out
    if c == 2.0:
        for i in range(n):
            for j in range(m):
                o[i, j] = a[i, j] * a[i, j]
    else:
        for i in range(n):
            for j in range(m):
                o[i, j] = pow(a[i, j], c)
    return out


def sin_(double[:, ::1] a):
    cdef Py_ssize_t i, j, n = a.shape[0], m = a.shape[1]
    out = np.empty((n, m))
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(m):
            o[i, j] = sin(a[i, j])
    return out


def cos_(double[:, ::1] a):
    cdef Py_ssize_t i, j, n = a.shape[0], m = a.shape[1]
    out = np.empty((n, m))
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(m):
            o[i, j] = cos(a[i, j])
    return out


def sqrt_(double[:, ::1] a):
    cdef Py_ssize_t i, j, n = a.shape[0], m = a.shape[1]
    out = np.empty((n, m))
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(m):
            o[i, j] = sqrt(a[i, j])
    return out


def abs_(double[:, ::1] a):
    cdef Py_ssize_t i, j, n = a.shape[0], m = a.shape[1]
    out = np.empty((n, m))
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(m):
            o[i, j] = fabs(a[i, j])
    return out


def log10_(double[:, ::1] a):
    cdef Py_ssize_t i, j, n = a.shape[0], m = a.shape[1]
    cdef double v
    out = np.empty((n, m))
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(m):
            v = a[i, j]
            if v < _CLAMP:
                v = _CLAMP
            o[i, j] = log10(v)
    return out


def relu_(double[:, ::1] a):
    cdef Py_ssize_t i, j, n = a.shape[0], m = a.shape[1]
    cdef double v
    out = np.empty((n, m))
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(m):
            v = a[i, j]
            o[i, j] = v if v > 0.0 else 0.0
    return out


def badd(double[:, ::1] a, double[:, ::1] r):
    cdef Py_ssize_t i, j, n = a.shape[0], m = a.shape[1]
    out = np.empty((n, m))
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(m):
            o[i, j] = a[i, j] + r[0, j]
    return out


def bmul(double[:, ::1] a, double[:, ::1] r):
    cdef Py_ssize_t i, j, n = a.shape[0], m = a.shape[1]
    out = np.empty((n, m))
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(m):
            o[i, j] = a[i, j] * r[0, j]
    return out


def sum_all(double[:, ::1] a):
    # four independent accumulators break the serial add dependency so the
    # loop pipelines; the final cross-add is the only ordering difference
    cdef Py_ssize_t k, nm = a.shape[0] * a.shape[1]
    cdef Py_ssize_t tail = nm - nm % 4
    cdef double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0
    cdef const double* p = &a[0, 0]
    for k in range(0, tail, 4):
        s0 += p[k]
        s1 += p[k + 1]
        s2 += p[k + 2]
        s3 += p[k + 3]
    for k in range(tail, nm):
        s0 += p[k]
    return (s0 + s1) + (s2 + s3)


def col_sum(double[:, ::1] a):
    cdef Py_ssize_t i, j, n = a.shape[0], m = a.shape[1]
    out = np.zeros((1, m))
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(m):
            o[0, j] += a[i, j]
    return out


# ---- in-place adjoint accumulators ----


def iadd(double[:, ::1] acc, double[:, ::1] g):
    cdef Py_ssize_t i, j, n = acc.shape[0], m = acc.shape[1]
    for i in range(n):
        for j in range(m):
            acc[i, j] += g[i, j]


def isub(double[:, ::1] acc, double[:, ::1] g):
    cdef Py_ssize_t i, j, n = acc.shape[0], m = acc.shape[1]
    for i in range(n):
        for j in range(m):
            acc[i, j] -= g[i, j]


def iadd_s(double[:, ::1] acc, double[:, ::1] g, double c):
    cdef Py_ssize_t i, j, n = acc.shape[0], m = acc.shape[1]
    for i in range(n):
        for j in range(m):
            acc[i, j] += g[i, j] * c


def iadd_mul(double[:, ::1] acc, double[:, ::1] g, double[:, ::1] w):
    cdef Py_ssize_t i, j, n = acc.shape[0], m = acc.shape[1]
    for i in range(n):
        for j in range(m):
            acc[i, j] += g[i, j] * w[i, j]


def iadd_div(double[:, ::1] acc, double[:, ::1] g, double[:, ::1] b):
    cdef Py_ssize_t i, j, n = acc.shape[0], m = acc.shape[1]
    for i in range(n):
        for j in range(m):
            acc[i, j] += g[i, j] / b[i, j]


def isub_ydiv(double[:, ::1] acc, double[:, ::1] g, double[:, ::1] y,
              double[:, ::1] b):
    cdef Py_ssize_t i, j, n = acc.shape[0], m = acc.shape[1]
    for i in range(n):
        for j in range(m):
            acc[i, j] -= g[i, j] * y[i, j] / b[i, j]


def iadd_dpow(double[:, ::1] acc, double[:, ::1] g, double[:, ::1] a, double c):
    cdef Py_ssize_t i, j, n = acc.shape[0], m = acc.shape[1]
    if c == 2.0:
        for i in range(n):
            for j in range(m):
                acc[i, j] += g[i, j] * (2.0 * a[i, j])
    else:
        for i in range(n):
            for j in range(m):
                acc[i, j] += g[i, j] * (c * pow(a[i, j], c - 1.0))


def iadd_dsin(double[:, ::1] acc, double[:, ::1] g, double[:, ::1] a):
    cdef Py_ssize_t i, j, n = acc.shape[0], m = acc.shape[1]
    for i in range(n):
        for j in range(m):
            acc[i, j] += g[i, j] * cos(a[i, j])


def iadd_dcos(double[:, ::1] acc, double[:, ::1] g, double[:, ::1] a):
    cdef Py_ssize_t i, j, n = acc.shape[0], m = acc.shape[1]
    for i in range(n):
        for j in range(m):
            acc[i, j] -= g[i, j] * sin(a[i, j])


def iadd_dsqrt(double[:, ::1] acc, double[:, ::1] g, double[:, ::1] y):
    cdef Py_ssize_t i, j, n = acc.shape[0], m = acc.shape[1]
    for i in range(n):
        for j in range(m):
            acc[i, j] += g[i, j] / (2.0 * y[i, j])


def iadd_dabs(double[:, ::1] acc, double[:, ::1] g, double[:, ::1] a):
    cdef Py_ssize_t i, j, n = acc.shape[0], m = acc.shape[1]
    cdef double v
    for i in range(n):
        for j in range(m):
            v = a[i, j]
            if v > 0.0:
                acc[i, j] += g[i, j]
            elif v < 0.0:
                acc[i, j] -= g[i, j]


def iadd_dlog10(double[:, ::1] acc, double[:, ::1] g, double[:, ::1] a):
    cdef Py_ssize_t i, j, n = acc.shape[0], m = acc.shape[1]
    cdef double v
    for i in range(n):
        for j in range(m):
            v = a[i, j]
            if v < _CLAMP:
                v = _CLAMP
            acc[i, j] += g[i, j] / (_LN10 * v)


def iadd_drelu(double[:, ::1] acc, double[:, ::1] g, double[:, ::1] a):
    # branchless (multiply by the 0/1 comparison) over flat pointers so the
    # loop vectorizes instead of mispredicting on sign-random activations
    cdef Py_ssize_t k, nm = acc.shape[0] * acc.shape[1]
    cdef double* pacc = &acc[0, 0]
    cdef const double* pg = &g[0, 0]
    cdef const double* pa = &a[0, 0]
    for k in range(nm):
        pacc[k] += pg[k] * <double>(pa[k] > 0.0)


def iadd_bmul(double[:, ::1] acc, double[:, ::1] g, double[:, ::1] r):
    cdef Py_ssize_t i, j, n = acc.shape[0], m = acc.shape[1]
    for i in range(n):
        for j in range(m):
            acc[i, j] += g[i, j] * r[0, j]


def iadd_colsum(double[:, ::1] acc, double[:, ::1] g):
    cdef Py_ssize_t i, j, n = g.shape[0], m = g.shape[1]
    for i in range(n):
        for j in range(m):
            acc[0, j] += g[i, j]


def iadd_rowdot(double[:, ::1] acc, double[:, ::1] g, double[:, ::1] w):
    cdef Py_ssize_t i, j, n = g.shape[0], m = g.shape[1]
    for i in range(n):
        for j in range(m):
            acc[0, j] += g[i, j] * w[i, j]


def iadd_fill(double[:, ::1] acc, double v):
    cdef Py_ssize_t i, j, n = acc.shape[0], m = acc.shape[1]
    for i in range(n):
        for j in range(m):
            acc[i, j] += v
