"""2x2 block saddle-point operator [[K, B1], [B2, -Cz]] and assembled systems."""

from __future__ import annotations

import numpy as np
import scipy.sparse

from .errors import DimensionError
from .sparse import BlockVector, SparseMatrix, spmv


class SaddleOperator:
    """Block operator acting as [K u + B1 lam, B2 u - Cz lam].

    The minus sign on Cz follows the assembled system convention; tangential
    constraint rows live in Cz, normal rows in B2.
    """

    __slots__ = ("K", "B1", "B2", "Cz")

    def __init__(self, K: SparseMatrix, B1: SparseMatrix, B2: SparseMatrix, Cz: SparseMatrix):
        if K.num_rows != K.num_cols:
            raise DimensionError("K must be square")
        if Cz.num_rows != Cz.num_cols:
            raise DimensionError("Cz must be square")
        if B1.shape != (K.num_rows, Cz.num_rows) or B2.shape != (Cz.num_rows, K.num_rows):
            raise DimensionError("saddle block dimensions are inconsistent")
        self.K = K
        self.B1 = B1
        self.B2 = B2
        self.Cz = Cz

    @property
    def n_u(self) -> int:
        return self.K.num_rows

    @property
    def n_lam(self) -> int:
        return self.Cz.num_rows

    @property
    def total_rows(self) -> int:
        return self.n_u + self.n_lam

    @property
    def nnz(self) -> int:
        return self.K.nnz + self.B1.nnz + self.B2.nnz + self.Cz.nnz

    def apply(self, x: BlockVector) -> BlockVector:
        u = spmv(self.K, x.u) + spmv(self.B1, x.lam)
        lam = spmv(self.B2, x.u) - spmv(self.Cz, x.lam)
        return BlockVector(u, lam)

    def residual(self, x: BlockVector, b: BlockVector) -> BlockVector:
        ax = self.apply(x)
        return BlockVector(b.u - ax.u, b.lam - ax.lam)

    def merged(self) -> SparseMatrix:
        """Monolithic sparse matrix [[K, B1], [B2, -Cz]]."""
        m = scipy.sparse.bmat(
            [
                [self.K.to_scipy(), self.B1.to_scipy()],
                [self.B2.to_scipy(), -self.Cz.to_scipy()],
            ],
            format="csr",
        )
        return SparseMatrix.from_scipy(m)

    def merged_dense(self) -> np.ndarray:
        top = np.hstack([self.K.to_dense(), self.B1.to_dense()])
        bot = np.hstack([self.B2.to_dense(), -self.Cz.to_dense()])
        return np.vstack([top, bot])


class SaddleSystem:
    """Saddle operator together with its block right-hand side.

    `row_is_normal[j]` marks constraint row j as a normal-gap row (True) or a
    tangential frictionless row (False); None when the system did not come
    from the contact assembler.
    """

    __slots__ = ("op", "rhs", "row_is_normal")

    def __init__(self, op: SaddleOperator, rhs: BlockVector, row_is_normal=None):
        if len(rhs.u) != op.n_u or len(rhs.lam) != op.n_lam:
            raise DimensionError("rhs block lengths do not match the operator")
        self.op = op
        self.rhs = rhs
        self.row_is_normal = None if row_is_normal is None else np.asarray(row_is_normal, dtype=bool)

    @property
    def K(self):
        return self.op.K

    @property
    def B1(self):
        return self.op.B1

    @property
    def B2(self):
        return self.op.B2

    @property
    def Cz(self):
        return self.op.Cz

    @property
    def n_u(self) -> int:
        return self.op.n_u

    @property
    def n_lam(self) -> int:
        return self.op.n_lam
