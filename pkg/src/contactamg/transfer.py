"""Tentative and smoothed prolongators plus the segregated 2x2 block transfers.

Per aggregate, the near-kernel rows are orthonormalized (QR); the Q factors
become the columns of the tentative prolongator and the R factors the coarse
near-kernel.  Displacement prolongators are optionally smoothed by one damped
Jacobi sweep; Lagrange-multiplier prolongators always stay tentative.  The
block transfer keeps the two fields segregated so the coarse operator retains
the saddle structure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .aggregation import UNASSIGNED, Aggregation
from .errors import DimensionError, SetupError, SingularMatrixError
from .saddle import SaddleOperator
from .sparse import SparseMatrix, extract_diagonal, galerkin_triple, sp_transpose

# relative cutoff identifying dependent near-kernel columns inside one aggregate
_RANK_TOL = 1e-10

NULLSPACE_RIGID_BODY_2D = "rigid-body-2d"
NULLSPACE_CONSTANT_PER_COMPONENT = "constant-per-component"


@dataclass
class NullSpace:
    vectors: np.ndarray  # n_dofs x k, row-major
    kind: str


@dataclass
class TentativeResult:
    P: SparseMatrix
    coarse_ns: NullSpace
    coarse_dof_agg: np.ndarray  # aggregate owning each coarse DOF
    dropped_columns: int = 0


@dataclass
class BlockTransfer:
    P_u: SparseMatrix
    R_u: SparseMatrix
    P_lam: SparseMatrix
    R_lam: SparseMatrix

    @property
    def n_coarse_u(self) -> int:
        return self.P_u.num_cols

    @property
    def n_coarse_lam(self) -> int:
        return self.P_lam.num_cols

    def restrict(self, r_u, r_lam):
        return self.R_u.to_scipy() @ r_u, self.R_lam.to_scipy() @ r_lam

    def prolong(self, c_u, c_lam):
        return self.P_u.to_scipy() @ c_u, self.P_lam.to_scipy() @ c_lam


def build_nullspace(coords_or_count, kind: str, dofs_per_node: int = 2) -> NullSpace:
    """Near-kernel vectors: 2-D rigid-body modes or per-component constants."""
    if kind == NULLSPACE_RIGID_BODY_2D:
        coords = np.asarray(coords_or_count, dtype=np.float64)
        n = coords.shape[0]
        vecs = np.zeros((2 * n, 3))
        vecs[0::2, 0] = 1.0
        vecs[1::2, 1] = 1.0
        vecs[0::2, 2] = -coords[:, 1]
        vecs[1::2, 2] = coords[:, 0]
        return NullSpace(vecs, kind)
    if kind == NULLSPACE_CONSTANT_PER_COMPONENT:
        n = int(coords_or_count)
        vecs = np.zeros((dofs_per_node * n, dofs_per_node))
        for c in range(dofs_per_node):
            vecs[c::dofs_per_node, c] = 1.0
        return NullSpace(vecs, kind)
    raise ValueError(f"unknown null space kind: {kind!r}")


def tentative_prolongator(aggs: Aggregation, ns: NullSpace, dofs_per_node: int = None, dof_node=None) -> TentativeResult:
    """Per-aggregate QR of the near-kernel rows.

    Returns the tentative prolongator with orthonormal columns, the coarse
    near-kernel reproducing `ns` exactly, and the aggregate owning each coarse
    DOF.  Rank-deficient aggregate blocks drop their dependent columns (the
    count is recorded).
    """
    vecs = np.asarray(ns.vectors, dtype=np.float64)
    n_dofs, k = vecs.shape
    if dof_node is None:
        if dofs_per_node is None:
            raise ValueError("pass dofs_per_node or dof_node")
        dof_node = np.arange(n_dofs, dtype=np.int64) // dofs_per_node
    else:
        dof_node = np.asarray(dof_node, dtype=np.int64)
        if len(dof_node) != n_dofs:
            raise DimensionError("dof_node length does not match the null space")
    if np.any(aggs.node_to_agg == UNASSIGNED):
        raise SetupError("tentative prolongator requires a complete aggregation")

    agg_of_dof = aggs.node_to_agg[dof_node]
    rows_out, cols_out, vals_out = [], [], []
    coarse_rows = []
    coarse_dof_agg = []
    dropped = 0
    next_col = 0

    for a in range(aggs.num_aggs):
        dofs = np.where(agg_of_dof == a)[0]
        if len(dofs) == 0:
            raise SetupError(f"aggregate {a} owns no DOFs")
        B = vecs[dofs, :]
        # column-pivoted QR keeps reconstruction exact when dropping columns
        Q, R, piv = scipy.linalg.qr(B, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        scale = diag[0] if len(diag) and diag[0] > 0.0 else 0.0
        if scale == 0.0:
            raise SetupError(f"aggregate {a}: near-kernel block is identically zero")
        r = int(np.sum(diag > _RANK_TOL * scale))
        dropped += k - r
        perm = np.zeros((k, k))
        perm[piv, np.arange(k)] = 1.0  # B @ perm = Q R  =>  B = Q R perm^T
        Rfull = R[:r, :] @ perm.T
        for local, col in enumerate(range(next_col, next_col + r)):
            rows_out.append(dofs)
            cols_out.append(np.full(len(dofs), col, dtype=np.int64))
            vals_out.append(Q[:, local])
            coarse_dof_agg.append(a)
        coarse_rows.append(Rfull)
        next_col += r

    P = SparseMatrix.from_coo(
        np.concatenate(rows_out),
        np.concatenate(cols_out),
        np.concatenate(vals_out),
        (n_dofs, next_col),
    )
    coarse_ns = NullSpace(np.vstack(coarse_rows), ns.kind)
    return TentativeResult(P, coarse_ns, np.asarray(coarse_dof_agg, dtype=np.int64), dropped)


def estimate_lambda_max(A: SparseMatrix, d: np.ndarray, iterations: int = 10) -> float:
    """Largest eigenvalue of D^-1 A by power iteration from the ones vector."""
    n = A.num_rows
    v = np.ones(n) / np.sqrt(n)
    Asp = A.to_scipy()
    lam = 1.0
    for _ in range(iterations):
        w = (Asp @ v) / d
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 1.0
        lam = norm
        v = w / norm
    return float(lam)


def smooth_prolongator(P_tent: SparseMatrix, A: SparseMatrix, omega: float):
    """One damped Jacobi sweep: P = P_tent - (omega / lambda_max) D^-1 A P_tent.

    `omega` is given in the spectrally normalized convention; lambda_max of
    D^-1 A is estimated with 10 power-iteration steps.  Returns the smoothed
    prolongator and the lambda_max estimate.
    """
    if A.num_rows != A.num_cols or A.num_rows != P_tent.num_rows:
        raise DimensionError("smooth_prolongator: A and P_tent dimensions mismatch")
    if omega == 0.0:
        return P_tent, 1.0
    d = extract_diagonal(A, "plain")
    if np.any(d == 0.0):
        row = int(np.argmax(d == 0.0))
        raise SingularMatrixError(f"smooth_prolongator: zero diagonal at row {row}")
    lam_max = estimate_lambda_max(A, d)
    omega_eff = omega / lam_max
    Dinv_A = SparseMatrix.from_scipy(A.to_scipy().multiply(1.0 / d[:, None]))
    smoothed = P_tent.to_scipy() - omega_eff * (Dinv_A.to_scipy() @ P_tent.to_scipy())
    return SparseMatrix.from_scipy(smoothed), lam_max


def build_block_transfer(P_u: SparseMatrix, P_lam: SparseMatrix) -> BlockTransfer:
    """Segregated transfer; restrictions are the transposed prolongators."""
    return BlockTransfer(P_u, sp_transpose(P_u), P_lam, sp_transpose(P_lam))


def coarsen_block(op: SaddleOperator, T: BlockTransfer) -> SaddleOperator:
    """Blockwise Galerkin product preserving the saddle structure."""
    if T.P_u.num_rows != op.n_u or T.P_lam.num_rows != op.n_lam:
        raise DimensionError("transfer dimensions do not match the operator")
    K_c = galerkin_triple(T.R_u, op.K, T.P_u)
    B1_c = galerkin_triple(T.R_u, op.B1, T.P_lam)
    B2_c = galerkin_triple(T.R_lam, op.B2, T.P_u)
    Cz_c = galerkin_triple(T.R_lam, op.Cz, T.P_lam)
    return SaddleOperator(K_c, B1_c, B2_c, Cz_c)
