# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled CSR kernels: matvec, ILU(0) factorization, combined-factor solve."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def csr_matvec(const long[::1] row_ptr, const long[::1] col_idx,
               const double[::1] values, const double[::1] x,
               double[::1] out):
    """out = A @ x for a CSR matrix given by (row_ptr, col_idx, values)."""
    cdef Py_ssize_t nrows = row_ptr.shape[0] - 1
    cdef Py_ssize_t i, p
    cdef double acc
    for i in range(nrows):
        acc = 0.0
        for p in range(row_ptr[i], row_ptr[i + 1]):
            acc += values[p] * x[col_idx[p]]
        out[i] = acc


cdef inline Py_ssize_t _find_col(const long[::1] col_idx, Py_ssize_t lo,
                                 Py_ssize_t hi, long col) noexcept:
    # binary search in the sorted slice col_idx[lo:hi]; -1 if absent
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) // 2
        if col_idx[mid] < col:
            lo = mid + 1
        elif col_idx[mid] > col:
            hi = mid
        else:
            return mid
    return -1


def ilu0_factor(const long[::1] row_ptr, const long[::1] col_idx,
                double[::1] values, const long[::1] diag_idx):
    """In-place ILU(0) on the CSR arrays; combined L\\U factor, unit L diagonal.

    Returns -1 on success, else the row index of the zero pivot.
    """
    cdef Py_ssize_t nrows = row_ptr.shape[0] - 1
    cdef Py_ssize_t i, p, q, j
    cdef long k
    cdef double pivot, lik
    for i in range(nrows):
        for p in range(row_ptr[i], diag_idx[i]):
            k = col_idx[p]
            pivot = values[diag_idx[k]]
            if pivot == 0.0:
                return k
            lik = values[p] / pivot
            values[p] = lik
            for q in range(diag_idx[k] + 1, row_ptr[k + 1]):
                j = _find_col(col_idx, p + 1, row_ptr[i + 1], col_idx[q])
                if j >= 0:
                    values[j] -= lik * values[q]
        if values[diag_idx[i]] == 0.0:
            return i
    return -1


def ilu0_solve(const long[::1] row_ptr, const long[::1] col_idx,
               const double[::1] values, const long[::1] diag_idx,
               const double[::1] b, double[::1] out):
    """Solve L U x = b with the combined ILU(0) factor (unit L diagonal)."""
    cdef Py_ssize_t nrows = row_ptr.shape[0] - 1
    cdef Py_ssize_t i, p
    cdef double acc
    for i in range(nrows):
        acc = b[i]
        for p in range(row_ptr[i], diag_idx[i]):
            acc -= values[p] * out[col_idx[p]]
        out[i] = acc
    for i in range(nrows - 1, -1, -1):
        acc = out[i]
        for p in range(diag_idx[i] + 1, row_ptr[i + 1]):
            acc -= values[p] * out[col_idx[p]]
        out[i] = acc / values[diag_idx[i]]
