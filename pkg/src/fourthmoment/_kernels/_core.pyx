# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops; see _fallback.py for the reference semantics."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def eval_terms(const cnp.int64_t[::1] term_ptr,
               const cnp.int64_t[::1] labels,
               const cnp.int64_t[::1] powers,
               const double[::1] weights,
               const double[:, ::1] xi,
               int max_power):
    cdef Py_ssize_t n_samples = xi.shape[0]
    cdef Py_ssize_t dim = xi.shape[1]
    cdef Py_ssize_t n_terms = weights.shape[0]
    cdef Py_ssize_t s, j, k, t, m
    cdef double x, acc, prod
    out = np.empty(n_samples, dtype=np.float64)
    cdef double[::1] out_v = out
    table = np.empty((dim, max_power + 1), dtype=np.float64)
    cdef double[:, ::1] tab = table
    for s in range(n_samples):
        for j in range(dim):
            x = xi[s, j]
            tab[j, 0] = 1.0
            if max_power >= 1:
                tab[j, 1] = x
            for m in range(2, max_power + 1):
                tab[j, m] = x * tab[j, m - 1] - (m - 1) * tab[j, m - 2]
        acc = 0.0
        for k in range(n_terms):
            prod = weights[k]
            for t in range(term_ptr[k], term_ptr[k + 1]):
                prod *= tab[labels[t], powers[t]]
            acc += prod
        out_v[s] = acc
    return out


cdef inline double _lag_dot(const double* a, Py_ssize_t n, Py_ssize_t lag) nogil:
    # four independent accumulators break the add dependency chain
    cdef Py_ssize_t i, m = n - lag
    cdef double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0
    cdef const double* b = a + lag
    i = 0
    while i + 4 <= m:
        s0 += a[i] * b[i]
        s1 += a[i + 1] * b[i + 1]
        s2 += a[i + 2] * b[i + 2]
        s3 += a[i + 3] * b[i + 3]
        i += 4
    while i < m:
        s0 += a[i] * b[i]
        i += 1
    return (s0 + s1) + (s2 + s3)


def banded_quadform(const double[:, ::1] v, const double[::1] rho):
    cdef Py_ssize_t n_rows = v.shape[0]
    cdef Py_ssize_t n = v.shape[1]
    cdef Py_ssize_t top = rho.shape[0] - 1
    cdef Py_ssize_t r, lag
    cdef double acc
    if top > n - 1:
        top = n - 1
    out = np.empty(n_rows, dtype=np.float64)
    cdef double[::1] out_v = out
    with nogil:
        for r in range(n_rows):
            acc = rho[0] * _lag_dot(&v[r, 0], n, 0)
            for lag in range(1, top + 1):
                acc += 2.0 * rho[lag] * _lag_dot(&v[r, 0], n, lag)
            out_v[r] = acc
    return out


def hermite_e(int m, const double[::1] x):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, k
    cdef double a, b, c, xv
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] out_v = out
    for i in range(n):
        xv = x[i]
        if m == 0:
            out_v[i] = 1.0
            continue
        a = 1.0
        b = xv
        for k in range(2, m + 1):
            c = xv * b - (k - 1) * a
            a = b
            b = c
        out_v[i] = b
    return out
