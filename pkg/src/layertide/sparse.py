"""Sparse linear-algebra kernel layer: CSR storage, SpMV, ILU(0), direct LU.

The compressed-row matrix is the common currency of assembly, factorization
and matrix-vector products.  Hot loops (SpMV, ILU(0) factor/solve) run in the
compiled kernel backend when available; the sparse direct factorization wraps
SuperLU from :mod:`scipy.sparse.linalg`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as _sps
import scipy.sparse.linalg as _spla

from . import _kernels


class FactorizationError(Exception):
    """A pivot failed during factorization.  Carries the offending index."""

    def __init__(self, message, pivot_index=None):
        super().__init__(message)
        self.pivot_index = pivot_index


class ZeroPivotError(FactorizationError):
    """ILU(0) hit an exactly zero (or structurally missing) pivot."""


class SingularMatrixError(FactorizationError):
    """The sparse direct factorization found the matrix singular."""


@dataclass(frozen=True)
class CsrMatrix:
    """General sparse matrix in compressed-row form.

    ``row_ptr`` is nondecreasing with length ``nrows + 1``; column indices are
    strictly increasing within each row (no duplicates).
    """

    nrows: int
    ncols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.row_ptr.shape != (self.nrows + 1,):
            raise ValueError("row_ptr length must be nrows + 1")
        if self.row_ptr[0] != 0 or self.row_ptr[-1] != self.col_idx.shape[0]:
            raise ValueError("row_ptr must start at 0 and end at nnz")
        if np.any(np.diff(self.row_ptr) < 0):
            raise ValueError("row_ptr must be nondecreasing")
        if self.col_idx.shape != self.values.shape:
            raise ValueError("col_idx and values must have equal length")
        if self.col_idx.size:
            if self.col_idx.min() < 0 or self.col_idx.max() >= self.ncols:
                raise ValueError("column index out of range")
            # strictly increasing within each row <=> sorted and no duplicates
            inner = np.diff(self.col_idx) <= 0
            inner[self.row_ptr[1:-1] - 1] = False
            if inner.any():
                raise ValueError("column indices must strictly increase per row")

    # -- constructors -----------------------------------------------------

    @staticmethod
    def from_coo(nrows, ncols, rows, cols, vals):
        """Build from triplets, summing duplicate (row, col) entries."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size:
            first = np.empty(rows.size, dtype=bool)
            first[0] = True
            first[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            group = np.cumsum(first) - 1
            vals = np.bincount(group, weights=vals)
            rows, cols = rows[first], cols[first]
        row_ptr = np.zeros(nrows + 1, dtype=np.int64)
        np.add.at(row_ptr, rows + 1, 1)
        np.cumsum(row_ptr, out=row_ptr)
        return CsrMatrix(nrows, ncols, row_ptr, cols, np.ascontiguousarray(vals))

    @staticmethod
    def from_dense(a):
        a = np.asarray(a, dtype=np.float64)
        rows, cols = np.nonzero(a)
        return CsrMatrix.from_coo(a.shape[0], a.shape[1], rows, cols, a[rows, cols])

    @staticmethod
    def identity(n):
        idx = np.arange(n, dtype=np.int64)
        return CsrMatrix(n, n, np.arange(n + 1, dtype=np.int64), idx, np.ones(n))

    @staticmethod
    def from_diagonal(diag):
        diag = np.asarray(diag, dtype=np.float64)
        n = diag.shape[0]
        idx = np.arange(n, dtype=np.int64)
        return CsrMatrix(n, n, np.arange(n + 1, dtype=np.int64), idx, diag.copy())

    # -- basic ops ---------------------------------------------------------

    @property
    def nnz(self):
        return int(self.col_idx.shape[0])

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    def matvec(self, x, out=None):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.ncols,):
            raise ValueError(f"expected vector of length {self.ncols}, got {x.shape}")
        if out is None:
            out = np.empty(self.nrows)
        _kernels.csr_matvec(self.row_ptr, self.col_idx, self.values, x, out)
        return out

    def toarray(self):
        a = np.zeros((self.nrows, self.ncols))
        for i in range(self.nrows):
            sl = slice(self.row_ptr[i], self.row_ptr[i + 1])
            a[i, self.col_idx[sl]] = self.values[sl]
        return a

    def transpose(self):
        rows = np.repeat(np.arange(self.nrows, dtype=np.int64), np.diff(self.row_ptr))
        return CsrMatrix.from_coo(self.ncols, self.nrows, self.col_idx, rows, self.values)

    def scaled(self, alpha):
        return CsrMatrix(self.nrows, self.ncols, self.row_ptr, self.col_idx,
                         alpha * self.values)

    def with_values(self, values):
        """Same sparsity pattern, new values array."""
        return CsrMatrix(self.nrows, self.ncols, self.row_ptr, self.col_idx,
                         np.asarray(values, dtype=np.float64))

    def same_pattern(self, other):
        return (self.shape == other.shape
                and np.array_equal(self.row_ptr, other.row_ptr)
                and np.array_equal(self.col_idx, other.col_idx))

    def add(self, other):
        """Entrywise sum; fast path when the sparsity patterns coincide."""
        if self.shape != other.shape:
            raise ValueError("shape mismatch in sparse add")
        if self.same_pattern(other):
            return self.with_values(self.values + other.values)
        rows_a = np.repeat(np.arange(self.nrows, dtype=np.int64), np.diff(self.row_ptr))
        rows_b = np.repeat(np.arange(other.nrows, dtype=np.int64), np.diff(other.row_ptr))
        return CsrMatrix.from_coo(
            self.nrows, self.ncols,
            np.concatenate([rows_a, rows_b]),
            np.concatenate([self.col_idx, other.col_idx]),
            np.concatenate([self.values, other.values]))

    def diagonal(self):
        d = np.zeros(min(self.nrows, self.ncols))
        for i in range(d.shape[0]):
            sl = slice(self.row_ptr[i], self.row_ptr[i + 1])
            j = np.searchsorted(self.col_idx[sl], i)
            if j < sl.stop - sl.start and self.col_idx[sl.start + j] == i:
                d[i] = self.values[sl.start + j]
        return d

    def _to_scipy_csc(self):
        return _sps.csr_matrix(
            (self.values, self.col_idx, self.row_ptr), shape=self.shape).tocsc()


def spmv(a, x):
    """y = A @ x exactly in floating point; rejects length mismatches."""
    return a.matvec(x)


def block_csr(blocks, row_dims, col_dims):
    """Assemble a block matrix from a 2D grid of CsrMatrix / None entries."""
    row_off = np.concatenate([[0], np.cumsum(row_dims)])
    col_off = np.concatenate([[0], np.cumsum(col_dims)])
    rows, cols, vals = [], [], []
    for i, row in enumerate(blocks):
        for j, blk in enumerate(row):
            if blk is None:
                continue
            if blk.shape != (row_dims[i], col_dims[j]):
                raise ValueError(f"block ({i},{j}) has shape {blk.shape}, "
                                 f"expected {(row_dims[i], col_dims[j])}")
            r = np.repeat(np.arange(blk.nrows, dtype=np.int64), np.diff(blk.row_ptr))
            rows.append(r + row_off[i])
            cols.append(blk.col_idx + col_off[j])
            vals.append(blk.values)
    return CsrMatrix.from_coo(
        int(row_off[-1]), int(col_off[-1]),
        np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))


# -- ILU(0) ---------------------------------------------------------------


@dataclass(frozen=True)
class Ilu0Factors:
    """Combined L\\U factor on the sparsity pattern of the input (zero fill)."""

    matrix: CsrMatrix
    diag_idx: np.ndarray = field(repr=False)

    def apply(self, b, out=None):
        b = np.asarray(b, dtype=np.float64)
        if out is None:
            out = np.empty_like(b)
        _kernels.ilu0_solve(self.matrix.row_ptr, self.matrix.col_idx,
                            self.matrix.values, self.diag_idx, b, out)
        return out


def _diag_positions(a):
    """Index into the CSR value array of each diagonal entry; -1 if missing."""
    diag = np.full(a.nrows, -1, dtype=np.int64)
    for i in range(a.nrows):
        lo, hi = a.row_ptr[i], a.row_ptr[i + 1]
        j = lo + np.searchsorted(a.col_idx[lo:hi], i)
        if j < hi and a.col_idx[j] == i:
            diag[i] = j
    return diag


def ilu0_factor(a):
    """Incomplete LU with zero fill on the pattern of ``a``.

    Exact for matrices whose LU generates no fill (e.g. tridiagonal).
    Raises :class:`ZeroPivotError` with the row index on breakdown.
    """
    if a.nrows != a.ncols:
        raise ValueError("ILU(0) requires a square matrix")
    diag = _diag_positions(a)
    missing = np.nonzero(diag < 0)[0]
    if missing.size:
        raise ZeroPivotError(
            f"structurally zero diagonal at row {missing[0]}", int(missing[0]))
    factored = a.with_values(a.values.copy())
    bad = _kernels.ilu0_factor(factored.row_ptr, factored.col_idx,
                               factored.values, diag)
    if bad >= 0:
        raise ZeroPivotError(f"zero pivot in ILU(0) at row {bad}", int(bad))
    return Ilu0Factors(factored, diag)


# -- sparse direct factorization -------------------------------------------


@dataclass(frozen=True)
class DirectFactors:
    """Sparse LU with fill (SuperLU) behind a plain solve interface."""

    _lu: object = field(repr=False)
    shape: tuple = (0, 0)

    @property
    def perm_r(self):
        return self._lu.perm_r

    @property
    def perm_c(self):
        return self._lu.perm_c

    @property
    def lower(self):
        return self._lu.L

    @property
    def upper(self):
        return self._lu.U

    def solve(self, b):
        b = np.asarray(b, dtype=np.float64)
        if b.shape != (self.shape[0],):
            raise ValueError(f"expected vector of length {self.shape[0]}")
        return self._lu.solve(b)


def _first_zero_pivot(a):
    """Best-effort pivot index for singular matrices (dense scan, small n)."""
    if a.nrows > 2000:
        return None
    import scipy.linalg as sla

    with np.errstate(all="ignore"):
        _, u = sla.lu(a.toarray(), permute_l=True)
    d = np.abs(np.diag(u))
    bad = np.nonzero(d <= d.max() * 1e-14 if d.max() > 0 else d == 0)[0]
    return int(bad[0]) if bad.size else None


def direct_factor(a):
    """Sparse LU factorization for exact solves; raises on singular input."""
    if a.nrows != a.ncols:
        raise ValueError("direct factorization requires a square matrix")
    try:
        lu = _spla.splu(a._to_scipy_csc())
    except RuntimeError as exc:
        raise SingularMatrixError(
            f"singular matrix in direct factorization: {exc}",
            _first_zero_pivot(a)) from exc
    diag_u = lu.U.diagonal()
    if np.any(diag_u == 0.0) or not np.all(np.isfinite(lu.U.data)):
        bad = np.nonzero((diag_u == 0.0) | ~np.isfinite(diag_u))[0]
        raise SingularMatrixError(
            "singular matrix in direct factorization",
            int(bad[0]) if bad.size else None)
    return DirectFactors(lu, a.shape)


# -- MatrixMarket dump ------------------------------------------------------


def write_matrix_market(a, path):
    """Dump in MatrixMarket coordinate format for external cross-checking."""
    with open(path, "w") as f:
        f.write("%%MatrixMarket matrix coordinate real general\n")
        f.write(f"{a.nrows} {a.ncols} {a.nnz}\n")
        rows = np.repeat(np.arange(a.nrows, dtype=np.int64), np.diff(a.row_ptr))
        for r, c, v in zip(rows, a.col_idx, a.values):
            f.write(f"{r + 1} {c + 1} {v:.17g}\n")


def read_matrix_market(path):
    with open(path) as f:
        header = f.readline()
        if "coordinate" not in header:
            raise ValueError("only coordinate-format MatrixMarket is supported")
        line = f.readline()
        while line.startswith("%"):
            line = f.readline()
        nrows, ncols, nnz = (int(t) for t in line.split())
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz)
        for k in range(nnz):
            r, c, v = f.readline().split()
            rows[k], cols[k], vals[k] = int(r) - 1, int(c) - 1, float(v)
    return CsrMatrix.from_coo(nrows, ncols, rows, cols, vals)
