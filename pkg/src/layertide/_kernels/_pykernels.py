"""NumPy fallback for the compiled CSR kernels.

Same call signatures and semantics as ``_ckernels``; used when the extension
is not built or when ``LAYERTIDE_PURE_PYTHON=1`` is set.
"""

import numpy as np


def csr_matvec(row_ptr, col_idx, values, x, out):
    """out = A @ x for a CSR matrix given by (row_ptr, col_idx, values)."""
    nrows = row_ptr.shape[0] - 1
    if values.shape[0] == 0:
        out[:] = 0.0
        return
    prod = values * x[col_idx]
    rows = np.repeat(np.arange(nrows), np.diff(row_ptr))
    out[:] = np.bincount(rows, weights=prod, minlength=nrows)


def ilu0_factor(row_ptr, col_idx, values, diag_idx):
    """In-place ILU(0) on the CSR arrays; combined L\\U factor, unit L diagonal.

    Returns -1 on success, else the row index of the zero pivot.
    """
    nrows = row_ptr.shape[0] - 1
    for i in range(nrows):
        start, stop = row_ptr[i], row_ptr[i + 1]
        pos = {col_idx[p]: p for p in range(start, stop)}
        for p in range(start, diag_idx[i]):
            k = col_idx[p]
            pivot = values[diag_idx[k]]
            if pivot == 0.0:
                return k
            lik = values[p] / pivot
            values[p] = lik
            for q in range(diag_idx[k] + 1, row_ptr[k + 1]):
                j = pos.get(col_idx[q])
                if j is not None:
                    values[j] -= lik * values[q]
        if values[diag_idx[i]] == 0.0:
            return i
    return -1


def ilu0_solve(row_ptr, col_idx, values, diag_idx, b, out):
    """Solve L U x = b with the combined ILU(0) factor (unit L diagonal)."""
    nrows = row_ptr.shape[0] - 1
    y = out
    y[:] = b
    for i in range(nrows):
        s = row_ptr[i]
        d = diag_idx[i]
        if d > s:
            y[i] -= np.dot(values[s:d], y[col_idx[s:d]])
    for i in range(nrows - 1, -1, -1):
        d = diag_idx[i]
        e = row_ptr[i + 1]
        if e > d + 1:
            y[i] -= np.dot(values[d + 1:e], y[col_idx[d + 1:e]])
        y[i] /= values[d]
