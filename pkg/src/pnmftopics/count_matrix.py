"""Sparse count matrix with cheap row and column access.

Both the row-major (CSR) and the column-major (CSC, stored as the CSR of the
transpose) forms are built once at construction, because the alternating
solver sweeps over full rows of X and then over full columns.
"""

import io
import os
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln

MM_BANNER = "%%MatrixMarket matrix coordinate integer general"


class MatrixMarketError(ValueError):
    """Raised for malformed Matrix Market input."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class CountMatrix:
    """Immutable n x m matrix of non-negative integer counts.

    Use :meth:`from_triplets`, :meth:`from_dense` or :func:`read_matrix_market`
    rather than the constructor.
    """

    def __init__(self, csr):
        csr = sp.csr_matrix(csr, dtype=np.int64)
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        if csr.nnz and csr.data.min() < 0:
            raise ValueError("counts must be non-negative")
        self._csr = csr
        csc_t = sp.csr_matrix(csr.T)
        csc_t.sort_indices()
        self._csc_t = csc_t
        # float copies used by the numerical kernels
        self.row_values = csr.data.astype(np.float64)
        self.col_values = csc_t.data.astype(np.float64)
        for arr in (self.row_values, self.col_values):
            arr.flags.writeable = False

    @classmethod
    def from_triplets(cls, n, m, triplets):
        """Build from (row, col, count) triplets; zeros dropped, duplicates summed."""
        n, m = int(n), int(m)
        if n < 0 or m < 0:
            raise ValueError("matrix dimensions must be non-negative")
        rows, cols, vals = [], [], []
        for trip in triplets:
            i, j, x = trip
            if not (0 <= i < n and 0 <= j < m):
                raise IndexError(f"triplet {tuple(trip)} out of bounds for a {n}x{m} matrix")
            if x < 0:
                raise ValueError(f"triplet {tuple(trip)} has a negative count")
            if x != int(x):
                raise ValueError(f"triplet {tuple(trip)} has a non-integral count")
            rows.append(int(i))
            cols.append(int(j))
            vals.append(int(x))
        coo = sp.coo_matrix(
            (np.asarray(vals, dtype=np.int64),
             (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
            shape=(n, m),
        )
        return cls(coo.tocsr())

    @classmethod
    def from_dense(cls, dense):
        dense = np.asarray(dense)
        if dense.ndim != 2:
            raise ValueError("expected a 2-d array")
        if np.any(dense != np.round(dense)):
            raise ValueError("counts must be integral")
        return cls(sp.csr_matrix(dense.astype(np.int64)))

    @classmethod
    def from_scipy(cls, mat):
        mat = sp.csr_matrix(mat)
        if mat.nnz and np.any(mat.data != np.round(mat.data)):
            raise ValueError("counts must be integral")
        return cls(mat.astype(np.int64))

    @property
    def n(self):
        return self._csr.shape[0]

    @property
    def m(self):
        return self._csr.shape[1]

    @property
    def shape(self):
        return self._csr.shape

    @property
    def nnz(self):
        return self._csr.nnz

    @property
    def csr(self):
        """Row-major scipy view (do not modify)."""
        return self._csr

    @property
    def csc_t(self):
        """Row-major storage of X transposed, i.e. column-major access to X."""
        return self._csc_t

    @property
    def row_indptr(self):
        return self._csr.indptr

    @property
    def row_indices(self):
        return self._csr.indices

    @property
    def col_indptr(self):
        return self._csc_t.indptr

    @property
    def col_indices(self):
        return self._csc_t.indices

    def row(self, i):
        """Return (column indices, counts) of the nonzeros in row ``i``."""
        lo, hi = self._csr.indptr[i], self._csr.indptr[i + 1]
        return self._csr.indices[lo:hi], self._csr.data[lo:hi]

    def col(self, j):
        """Return (row indices, counts) of the nonzeros in column ``j``."""
        lo, hi = self._csc_t.indptr[j], self._csc_t.indptr[j + 1]
        return self._csc_t.indices[lo:hi], self._csc_t.data[lo:hi]

    def entries(self):
        """Sorted list of (row, col, count) for the stored nonzeros."""
        coo = self._csr.tocoo()
        return list(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))

    def toarray(self):
        return self._csr.toarray()

    def row_sums(self):
        return np.asarray(self._csr.sum(axis=1), dtype=np.int64).ravel()

    def col_sums(self):
        return np.asarray(self._csr.sum(axis=0), dtype=np.int64).ravel()

    def total(self):
        return int(self._csr.data.sum())

    @cached_property
    def log_factorial_sum(self):
        """Sum of log(x_ij!) over the nonzeros."""
        return float(gammaln(self.row_values + 1.0).sum())

    def drop_empty(self):
        """Remove all-zero rows and columns.

        Returns the reduced matrix plus the kept row and column indices.
        """
        keep_rows = np.flatnonzero(np.diff(self._csr.indptr) > 0)
        keep_cols = np.flatnonzero(np.diff(self._csc_t.indptr) > 0)
        sub = self._csr[keep_rows][:, keep_cols]
        return CountMatrix(sub), keep_rows, keep_cols

    def __eq__(self, other):
        if not isinstance(other, CountMatrix):
            return NotImplemented
        return self.shape == other.shape and (self._csr != other._csr).nnz == 0

    def __repr__(self):
        return f"CountMatrix(n={self.n}, m={self.m}, nnz={self.nnz})"


def from_triplets(n, m, triplets):
    return CountMatrix.from_triplets(n, m, triplets)


def row_sums(X):
    return X.row_sums()


def col_sums(X):
    return X.col_sums()


def total(X):
    return X.total()


def _parse_int(token, lineno, what):
    try:
        value = float(token)
    except ValueError:
        raise MatrixMarketError(f"cannot parse {what} {token!r}", lineno) from None
    if not np.isfinite(value) or value != int(value):
        raise MatrixMarketError(f"{what} {token!r} is not an integer", lineno)
    return int(value)


def read_matrix_market(path_or_file):
    """Read a Matrix Market coordinate file of counts.

    Accepts ``integer`` fields, or ``real`` fields whose values are all
    integral. Indices in the file are 1-based.
    """
    if isinstance(path_or_file, (str, os.PathLike)):
        with open(path_or_file, encoding="utf-8") as fh:
            return _read_mm(fh)
    return _read_mm(path_or_file)


def _read_mm(fh):
    lines = iter(enumerate(fh, start=1))
    try:
        lineno, banner = next(lines)
    except StopIteration:
        raise MatrixMarketError("empty file", 1) from None
    parts = banner.strip().lower().split()
    if len(parts) != 5 or parts[0] != "%%matrixmarket" or parts[1] != "matrix":
        raise MatrixMarketError("missing or malformed %%MatrixMarket banner", lineno)
    if parts[2] != "coordinate":
        raise MatrixMarketError(f"unsupported format {parts[2]!r}; need coordinate", lineno)
    if parts[3] not in ("integer", "real"):
        raise MatrixMarketError(f"unsupported field {parts[3]!r}", lineno)
    if parts[4] != "general":
        raise MatrixMarketError(f"unsupported symmetry {parts[4]!r}", lineno)

    size = None
    for lineno, line in lines:
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        tok = s.split()
        if len(tok) != 3:
            raise MatrixMarketError("size line needs 3 integers", lineno)
        size = [_parse_int(t, lineno, "size") for t in tok]
        break
    if size is None:
        raise MatrixMarketError("missing size line", lineno)
    n, m, nnz = size
    if min(n, m, nnz) < 0:
        raise MatrixMarketError("negative size", lineno)

    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz, dtype=np.int64)
    count = 0
    for lineno, line in lines:
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        tok = s.split()
        if len(tok) != 3:
            raise MatrixMarketError("entry line needs row, column and value", lineno)
        if count >= nnz:
            raise MatrixMarketError(f"more entries than the declared {nnz}", lineno)
        i = _parse_int(tok[0], lineno, "row index")
        j = _parse_int(tok[1], lineno, "column index")
        x = _parse_int(tok[2], lineno, "value")
        if not (1 <= i <= n and 1 <= j <= m):
            raise MatrixMarketError(f"index ({i}, {j}) outside a {n}x{m} matrix", lineno)
        if x < 0:
            raise MatrixMarketError(f"negative count {x}", lineno)
        rows[count], cols[count], vals[count] = i - 1, j - 1, x
        count += 1
    if count != nnz:
        raise MatrixMarketError(f"expected {nnz} entries, found {count}")
    coo = sp.coo_matrix((vals, (rows, cols)), shape=(n, m))
    return CountMatrix(coo.tocsr())


def write_matrix_market(X, path_or_file, comment=None):
    """Write ``X`` in Matrix Market coordinate integer format (1-based)."""
    buf = io.StringIO()
    buf.write(MM_BANNER + "\n")
    if comment:
        for line in str(comment).splitlines():
            buf.write(f"% {line}\n")
    buf.write(f"{X.n} {X.m} {X.nnz}\n")
    coo = X.csr.tocoo()
    for i, j, x in zip(coo.row, coo.col, coo.data):
        buf.write(f"{i + 1} {j + 1} {x}\n")
    text = buf.getvalue()
    if isinstance(path_or_file, (str, os.PathLike)):
        with open(path_or_file, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        path_or_file.write(text)
