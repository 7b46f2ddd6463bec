# cython: language_level=3
"""Compiled inner loops over the CSR edge arrays of a ToolGraph.

Must stay numerically identical to ``_kernels_py``: same loop order,
same operation order, no fused multiply-add.
"""
import numpy as np

cimport numpy as cnp

cnp.import_array()


def reweight_rows(const cnp.int64_t[::1] indptr,
                  const cnp.int64_t[::1] indices,
                  const double[::1] prior,
                  const double[::1] fvals,
                  double beta,
                  Py_ssize_t n_rows,
                  double[::1] out):
    cdef Py_ssize_t r, e, lo, hi
    cdef double total
    cdef double keep = 1.0 - beta
    with nogil:
        for r in range(n_rows):
            lo = indptr[r]
            hi = indptr[r + 1]
            total = 0.0
            for e in range(lo, hi):
                total = total + fvals[indices[e]]
            if total == 0.0:
                continue
            for e in range(lo, hi):
                out[e] = beta * prior[e] + keep * (fvals[indices[e]] / total)


def inbound_mean(const cnp.int64_t[::1] indptr,
                 const cnp.int64_t[::1] indices,
                 const double[::1] current,
                 Py_ssize_t n_sources,
                 Py_ssize_t n_nodes):
    cdef cnp.ndarray[double, ndim=1] sums = np.zeros(n_nodes, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts = np.zeros(n_nodes, dtype=np.int64)
    cdef double[::1] s = sums
    cdef cnp.int64_t[::1] c = counts
    cdef Py_ssize_t r, e, j
    with nogil:
        for r in range(n_sources):
            for e in range(indptr[r], indptr[r + 1]):
                j = indices[e]
                s[j] = s[j] + current[e]
                c[j] = c[j] + 1
        for j in range(n_nodes):
            if c[j] > 0:
                s[j] = s[j] / c[j]
    return sums
