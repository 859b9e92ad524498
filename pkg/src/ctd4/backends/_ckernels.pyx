# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the numpy kernels in ``pykernels``.

Matrix products go through BLAS dgemm; everything elementwise is a single
fused pass, which is where the win over numpy comes from at these sizes.
Signatures and semantics match ``pykernels`` exactly.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, isfinite, log1p, sqrt, tanh as ctanh
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

NAME = "cython"


cdef inline void _gemm(char ta, char tb, int m, int n, int k,
                       double* a, int lda, double* b, int ldb,
                       double* c, int ldc) noexcept nogil:
    cdef double one = 1.0
    cdef double zero = 0.0
    dgemm(&ta, &tb, &m, &n, &k, &one, a, &lda, b, &ldb, &zero, c, &ldc)


def matmul(cnp.ndarray[double, ndim=2, mode="c"] a not None,
           cnp.ndarray[double, ndim=2, mode="c"] b not None):
    cdef int m = a.shape[0], k = a.shape[1], n = b.shape[1]
    if b.shape[0] != k:
        raise ValueError("matmul: inner dimensions differ")
    cdef cnp.ndarray[double, ndim=2, mode="c"] out = np.empty((m, n))
    # Row-major A@B computed as the Fortran product B^T A^T written into out.
    with nogil:
        _gemm(b'n', b'n', n, m, k, &b[0, 0], n, &a[0, 0], k, &out[0, 0], n)
    return out


def matmul_nt(cnp.ndarray[double, ndim=2, mode="c"] a not None,
              cnp.ndarray[double, ndim=2, mode="c"] b not None):
    cdef int m = a.shape[0], k = a.shape[1], n = b.shape[0]
    if b.shape[1] != k:
        raise ValueError("matmul_nt: inner dimensions differ")
    cdef cnp.ndarray[double, ndim=2, mode="c"] out = np.empty((m, n))
    with nogil:
        _gemm(b't', b'n', n, m, k, &b[0, 0], k, &a[0, 0], k, &out[0, 0], n)
    return out


def matmul_tn(cnp.ndarray[double, ndim=2, mode="c"] a not None,
              cnp.ndarray[double, ndim=2, mode="c"] b not None):
    cdef int m = a.shape[0], k = a.shape[1], n = b.shape[1]
    if b.shape[0] != m:
        raise ValueError("matmul_tn: leading dimensions differ")
    cdef cnp.ndarray[double, ndim=2, mode="c"] out = np.empty((k, n))
    with nogil:
        _gemm(b'n', b't', n, k, m, &b[0, 0], n, &a[0, 0], k, &out[0, 0], n)
    return out


def add_bias_(cnp.ndarray[double, ndim=2, mode="c"] y not None,
              cnp.ndarray[double, ndim=1, mode="c"] bias not None):
    cdef Py_ssize_t m = y.shape[0], n = y.shape[1], i, j
    with nogil:
        for i in range(m):
            for j in range(n):
                y[i, j] += bias[j]
    return y


def add_bias_relu_(cnp.ndarray[double, ndim=2, mode="c"] y not None,
                   cnp.ndarray[double, ndim=1, mode="c"] bias not None):
    cdef Py_ssize_t m = y.shape[0], n = y.shape[1], i, j
    cdef double z
    with nogil:
        for i in range(m):
            for j in range(n):
                z = y[i, j] + bias[j]
                y[i, j] = z if z > 0.0 else 0.0
    return y


def relu_bwd_(object dz, object post):
    cdef double[::1] d = dz.ravel()
    cdef double[::1] p = post.ravel()
    cdef Py_ssize_t i, n = d.shape[0]
    with nogil:
        for i in range(n):
            # branchless select so the compiler can vectorize
            d[i] = d[i] if p[i] > 0.0 else 0.0
    return dz


def tanh_(object y):
    cdef double[::1] v = y.ravel()
    cdef Py_ssize_t i, n = v.shape[0]
    with nogil:
        for i in range(n):
            v[i] = ctanh(v[i])
    return y


def tanh_bwd_(object dz, object post):
    cdef double[::1] d = dz.ravel()
    cdef double[::1] p = post.ravel()
    cdef Py_ssize_t i, n = d.shape[0]
    with nogil:
        for i in range(n):
            d[i] *= 1.0 - p[i] * p[i]
    return dz


def softplus_shift_(object y, double shift):
    cdef double[::1] v = y.ravel()
    cdef Py_ssize_t i, n = v.shape[0]
    cdef double x
    with nogil:
        for i in range(n):
            x = v[i]
            if x > 0.0:
                v[i] = x + log1p(exp(-x)) + shift
            else:
                v[i] = log1p(exp(x)) + shift
    return y


def softplus_bwd_(object dz, object pre):
    cdef double[::1] d = dz.ravel()
    cdef double[::1] p = pre.ravel()
    cdef Py_ssize_t i, n = d.shape[0]
    cdef double x, e
    with nogil:
        for i in range(n):
            x = p[i]
            if x >= 0.0:
                d[i] /= 1.0 + exp(-x)
            else:
                e = exp(x)
                d[i] *= e / (1.0 + e)
    return dz


def colsum(cnp.ndarray[double, ndim=2, mode="c"] a not None):
    cdef Py_ssize_t m = a.shape[0], n = a.shape[1], i, j
    cdef cnp.ndarray[double, ndim=1, mode="c"] out = np.zeros(n)
    with nogil:
        for i in range(m):
            for j in range(n):
                out[j] += a[i, j]
    return out


def adam_(object p, object g, object m, object v, long t,
          double lr, double beta1, double beta2, double eps):
    cdef double[::1] pv = p.ravel()
    cdef double[::1] gv = g.ravel()
    cdef double[::1] mv = m.ravel()
    cdef double[::1] vv = v.ravel()
    cdef Py_ssize_t i, n = pv.shape[0]
    cdef double bc1 = 1.0 - beta1 ** t
    cdef double bc2 = 1.0 - beta2 ** t
    cdef double gi, ok = 1.0
    with nogil:
        for i in range(n):
            gi = gv[i]
            mv[i] = beta1 * mv[i] + (1.0 - beta1) * gi
            vv[i] = beta2 * vv[i] + (1.0 - beta2) * (gi * gi)
            pv[i] -= lr * (mv[i] / bc1) / (sqrt(vv[i] / bc2) + eps)
            if not isfinite(pv[i]):
                ok = 0.0
    return ok == 1.0


def polyak_(object target, object source, double tau):
    cdef double[::1] tv = target.ravel()
    cdef double[::1] sv = source.ravel()
    cdef Py_ssize_t i, n = tv.shape[0]
    with nogil:
        for i in range(n):
            tv[i] = (1.0 - tau) * tv[i] + tau * sv[i]
    return target
