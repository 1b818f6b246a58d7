"""Sparse (CSR) and small-dense linear algebra kernels.

Everything downstream (assembly, aggregation, transfers, smoothers, Krylov)
goes through the types and operations defined here.  Matrices are immutable
after construction; scipy.sparse supplies the heavy kernels behind the
canonical CSR representation.
"""

from __future__ import annotations

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse

from .errors import DimensionError, SingularMatrixError

# Entries below this magnitude are dropped when canonicalizing products,
# keeping Galerkin sparsity patterns deterministic without value-based
# thresholding.
DROP_TOL = 1e-300


class SparseMatrix:
    """Immutable CSR matrix with 64-bit indices.

    Within each row the column indices are strictly increasing and duplicate
    entries are summed on construction.
    """

    __slots__ = ("num_rows", "num_cols", "row_offsets", "col_indices", "values")

    def __init__(self, num_rows, num_cols, row_offsets, col_indices, values):
        self.num_rows = int(num_rows)
        self.num_cols = int(num_cols)
        self.row_offsets = np.ascontiguousarray(row_offsets, dtype=np.int64)
        self.col_indices = np.ascontiguousarray(col_indices, dtype=np.int64)
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        if self.row_offsets.shape != (self.num_rows + 1,):
            raise DimensionError("row_offsets length must be num_rows + 1")
        if self.row_offsets[0] != 0 or self.row_offsets[-1] != len(self.values):
            raise DimensionError("row_offsets must start at 0 and end at nnz")
        if len(self.col_indices) != len(self.values):
            raise DimensionError("col_indices and values length mismatch")
        for arr in (self.row_offsets, self.col_indices, self.values):
            arr.flags.writeable = False

    # -- constructors -------------------------------------------------------

    @staticmethod
    def from_scipy(mat) -> "SparseMatrix":
        """Canonicalize any scipy sparse matrix (sum dups, sort, drop tiny)."""
        csr = scipy.sparse.csr_matrix(mat)
        csr.sum_duplicates()
        csr.sort_indices()
        keep = np.abs(csr.data) >= DROP_TOL
        if not keep.all():
            coo = csr.tocoo()
            csr = scipy.sparse.csr_matrix(
                (coo.data[keep], (coo.row[keep], coo.col[keep])), shape=csr.shape
            )
            csr.sum_duplicates()
            csr.sort_indices()
        return SparseMatrix(
            csr.shape[0], csr.shape[1], csr.indptr, csr.indices, csr.data
        )

    @staticmethod
    def from_coo(rows, cols, vals, shape) -> "SparseMatrix":
        coo = scipy.sparse.coo_matrix(
            (np.asarray(vals, dtype=np.float64), (rows, cols)), shape=shape
        )
        return SparseMatrix.from_scipy(coo)

    @staticmethod
    def from_dense(arr) -> "SparseMatrix":
        return SparseMatrix.from_scipy(scipy.sparse.csr_matrix(np.asarray(arr, dtype=np.float64)))

    @staticmethod
    def identity(n) -> "SparseMatrix":
        return SparseMatrix.from_scipy(scipy.sparse.identity(n, format="csr"))

    @staticmethod
    def zeros(num_rows, num_cols) -> "SparseMatrix":
        return SparseMatrix(
            num_rows, num_cols, np.zeros(num_rows + 1, dtype=np.int64), [], []
        )

    @staticmethod
    def diagonal(d) -> "SparseMatrix":
        d = np.asarray(d, dtype=np.float64)
        return SparseMatrix.from_scipy(scipy.sparse.diags(d, format="csr"))

    # -- views --------------------------------------------------------------

    def to_scipy(self) -> scipy.sparse.csr_matrix:
        # Shares the underlying arrays; callers must not mutate.
        return scipy.sparse.csr_matrix(
            (self.values, self.col_indices, self.row_offsets),
            shape=(self.num_rows, self.num_cols),
        )

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    @property
    def nnz(self) -> int:
        return len(self.values)

    @property
    def shape(self):
        return (self.num_rows, self.num_cols)

    def __repr__(self):
        return f"SparseMatrix({self.num_rows}x{self.num_cols}, nnz={self.nnz})"


class BlockVector:
    """Displacement/Lagrange-multiplier block vector [u, lam]."""

    __slots__ = ("u", "lam")

    def __init__(self, u, lam):
        self.u = np.array(u, dtype=np.float64)
        self.lam = np.array(lam, dtype=np.float64)

    @staticmethod
    def zeros(n_u, n_lam) -> "BlockVector":
        return BlockVector(np.zeros(n_u), np.zeros(n_lam))

    @staticmethod
    def from_merged(x, n_u) -> "BlockVector":
        x = np.asarray(x, dtype=np.float64)
        return BlockVector(x[:n_u], x[n_u:])

    def merged(self) -> np.ndarray:
        return np.concatenate([self.u, self.lam])

    def copy(self) -> "BlockVector":
        return BlockVector(self.u, self.lam)

    def __len__(self):
        return len(self.u) + len(self.lam)


# -- operations -------------------------------------------------------------


def spmv(A: SparseMatrix, x) -> np.ndarray:
    """y = A @ x."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (A.num_cols,):
        raise DimensionError(f"spmv: x has length {x.shape}, expected ({A.num_cols},)")
    return A.to_scipy() @ x


def sp_transpose(A: SparseMatrix) -> SparseMatrix:
    return SparseMatrix.from_scipy(A.to_scipy().T)


def sp_matmul(A: SparseMatrix, B: SparseMatrix) -> SparseMatrix:
    if A.num_cols != B.num_rows:
        raise DimensionError(
            f"sp_matmul: inner dimensions {A.num_cols} != {B.num_rows}"
        )
    return SparseMatrix.from_scipy(A.to_scipy() @ B.to_scipy())


def galerkin_triple(R: SparseMatrix, A: SparseMatrix, P: SparseMatrix) -> SparseMatrix:
    """Coarse-level operator R @ A @ P."""
    if R.num_cols != A.num_rows or A.num_cols != P.num_rows:
        raise DimensionError("galerkin_triple: dimension mismatch")
    return SparseMatrix.from_scipy(R.to_scipy() @ A.to_scipy() @ P.to_scipy())


def extract_diagonal(A: SparseMatrix, mode: str = "plain") -> np.ndarray:
    """Diagonal of A; mode 'abs_rowsum' lumps sum_j |a_ij| onto the diagonal."""
    if A.num_rows != A.num_cols:
        raise DimensionError("extract_diagonal: matrix must be square")
    if mode == "plain":
        return A.to_scipy().diagonal()
    if mode == "abs_rowsum":
        d = np.asarray(np.abs(A.to_scipy()).sum(axis=1)).ravel()
        if np.any(d == 0.0):
            row = int(np.argmax(d == 0.0))
            raise SingularMatrixError(f"abs_rowsum lumping: row {row} is entirely zero")
        return d
    raise ValueError(f"unknown diagonal mode: {mode!r}")


def dense_lu_solve(A, b) -> np.ndarray:
    """Solve A x = b for dense square A via LU with partial pivoting."""
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError("dense_lu_solve: A must be square")
    if b.shape[0] != A.shape[0]:
        raise DimensionError("dense_lu_solve: rhs length mismatch")
    if A.shape[0] == 0:
        return np.zeros(0)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A)
    if np.any(np.diag(lu) == 0.0):
        raise SingularMatrixError("dense_lu_solve: zero pivot after pivoting")
    return scipy.linalg.lu_solve((lu, piv), b)


def dot(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionError("dot: length mismatch")
    return float(np.dot(x, y))


def axpy(alpha, x, y) -> np.ndarray:
    """alpha * x + y."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionError("axpy: length mismatch")
    return alpha * x + y


def norm2(x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return 0.0
    return float(np.linalg.norm(x))


# -- MatrixMarket I/O -------------------------------------------------------


def write_matrix_market(path, A: SparseMatrix) -> None:
    """Write A in MatrixMarket coordinate format (real, general, 1-based)."""
    # Write through a handle: mmwrite would otherwise append ".mtx" to paths
    # with unfamiliar extensions.
    with open(path, "wb") as fh:
        scipy.io.mmwrite(fh, A.to_scipy().tocoo(), field="real", symmetry="general")


def read_matrix_market(path) -> SparseMatrix:
    with open(path, "rb") as fh:
        mat = scipy.io.mmread(fh)
    return SparseMatrix.from_scipy(mat)


def write_vector(path, v) -> None:
    """Write a vector in MatrixMarket array format (n x 1)."""
    with open(path, "wb") as fh:
        scipy.io.mmwrite(fh, np.asarray(v, dtype=np.float64).reshape(-1, 1))


def read_vector(path) -> np.ndarray:
    with open(path, "rb") as fh:
        arr = scipy.io.mmread(fh)
    return np.asarray(arr).ravel()
