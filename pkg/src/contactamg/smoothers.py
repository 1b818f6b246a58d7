"""Point smoothers and Schur-complement block smoothers for saddle systems.

The block smoothers (Uzawa, Braess-Sarazin, SIMPLE/SIMPLEC) are
predictor-corrector coupling iterations; with exact inner solves each sweep
equals a Richardson step with the smoother's defining block matrix.  "Cheap"
variants replace the inner solves by a fixed number of point-smoother sweeps
started from zero, which keeps every sweep a fixed linear operator and thus
usable inside GMRES preconditioning.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .errors import ConfigError, SingularMatrixError
from .saddle import SaddleOperator, SaddleSystem
from .sparse import BlockVector, SparseMatrix, extract_diagonal

POINT_KINDS = ("jacobi", "sgs", "ilu0", "direct")
BLOCK_KINDS = ("uzawa", "braess_sarazin", "simple", "simplec")
A_HAT_MODES = ("plain_diag", "abs_rowsum", "exact")


@dataclass(frozen=True)
class PointSmootherConfig:
    kind: str = "sgs"
    sweeps: int = 1
    damping: float = 1.0

    def __post_init__(self):
        if self.kind not in POINT_KINDS:
            raise ConfigError(f"unknown point smoother kind: {self.kind!r}")
        if self.sweeps < 1:
            raise ConfigError("point smoother sweeps must be >= 1")
        if not (0.0 < self.damping < 2.0):
            raise ConfigError("point smoother damping must lie in (0, 2)")


@dataclass(frozen=True)
class BlockSmootherConfig:
    kind: str = "simplec"
    alpha: float = 0.7
    outer_sweeps: int = 1
    predictor: PointSmootherConfig = field(default_factory=PointSmootherConfig)
    corrector: PointSmootherConfig = field(default_factory=lambda: PointSmootherConfig(kind="ilu0"))
    a_hat_mode: str = "plain_diag"

    def __post_init__(self):
        if self.kind not in BLOCK_KINDS:
            raise ConfigError(f"unknown block smoother kind: {self.kind!r}")
        if self.alpha <= 0.0:
            raise ConfigError("alpha must be positive")
        if self.outer_sweeps < 1:
            raise ConfigError("outer_sweeps must be >= 1")
        if self.a_hat_mode not in A_HAT_MODES:
            raise ConfigError(f"unknown a_hat_mode: {self.a_hat_mode!r}")
        if self.kind == "braess_sarazin" and self.a_hat_mode != "plain_diag":
            raise ConfigError("braess_sarazin hard-codes the plain-diagonal predictor")

    def effective_a_hat_mode(self) -> str:
        if self.kind == "simplec":
            return "abs_rowsum"
        if self.kind == "braess_sarazin":
            return "plain_diag"
        return self.a_hat_mode


@dataclass
class SchurOperator:
    S_tilde: SparseMatrix
    a_hat_inv_diag: np.ndarray | None


# -- point smoothers ----------------------------------------------------------


def ilu0_factor(A: SparseMatrix):
    """ILU(0): no fill, no pivoting, natural ordering, on A's exact pattern.

    Returns the combined factor values on A's CSR pattern (unit lower diagonal
    implicit).  A zero pivot raises, identifying the row.
    """
    n = A.num_rows
    indptr, indices = A.row_offsets, A.col_indices
    vals = A.values.copy()
    pos = [dict() for _ in range(n)]
    for i in range(n):
        for p in range(indptr[i], indptr[i + 1]):
            pos[i][int(indices[p])] = p

    diag_pos = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        p = pos[i].get(i, -1)
        if p < 0:
            raise SingularMatrixError(f"ILU(0): missing diagonal entry in row {i}")
        diag_pos[i] = p

    for i in range(n):
        row_cols = indices[indptr[i] : indptr[i + 1]]
        row_start = indptr[i]
        for local_k, k in enumerate(row_cols):
            if k >= i:
                break
            pk = row_start + local_k
            ukk = vals[diag_pos[k]]
            if ukk == 0.0:
                raise SingularMatrixError(f"ILU(0): zero pivot in row {int(k)}")
            lik = vals[pk] / ukk
            vals[pk] = lik
            k_pos = pos[int(k)]
            for p in range(diag_pos[k] + 1, indptr[k + 1]):
                j = int(indices[p])
                pij = pos[i].get(j)
                if pij is not None:
                    vals[pij] -= lik * vals[p]
        if vals[diag_pos[i]] == 0.0:
            raise SingularMatrixError(f"ILU(0): zero pivot in row {i}")
    return vals


def _split_ilu0(A: SparseMatrix, factor_vals):
    n = A.num_rows
    coo_rows = np.repeat(np.arange(n), np.diff(A.row_offsets))
    cols = A.col_indices
    lower = coo_rows > cols
    upper = coo_rows <= cols
    L = scipy.sparse.csr_matrix(
        (factor_vals[lower], (coo_rows[lower], cols[lower])), shape=(n, n)
    ) + scipy.sparse.identity(n, format="csr")
    U = scipy.sparse.csr_matrix(
        (factor_vals[upper], (coo_rows[upper], cols[upper])), shape=(n, n)
    )
    return L.tocsc(), U.tocsc()


class PointSmoother:
    """A point smoother bound to one matrix; factorizations happen here."""

    def __init__(self, cfg: PointSmootherConfig, A: SparseMatrix):
        self.cfg = cfg
        self.A = A
        self._Asp = A.to_scipy()
        n = A.num_rows
        if cfg.kind == "jacobi":
            d = extract_diagonal(A, "plain")
            if np.any(d == 0.0):
                row = int(np.argmax(d == 0.0))
                raise SingularMatrixError(f"jacobi: zero diagonal in row {row}")
            self._dinv = cfg.damping / d
        elif cfg.kind == "sgs":
            d = extract_diagonal(A, "plain")
            if np.any(d == 0.0):
                row = int(np.argmax(d == 0.0))
                raise SingularMatrixError(f"sgs: zero diagonal in row {row}")
            dmat = scipy.sparse.diags(d / cfg.damping)
            lower = scipy.sparse.tril(self._Asp, k=-1) + dmat
            upper = scipy.sparse.triu(self._Asp, k=1) + dmat
            self._fwd = scipy.sparse.linalg.splu(lower.tocsc(), permc_spec="NATURAL")
            self._bwd = scipy.sparse.linalg.splu(upper.tocsc(), permc_spec="NATURAL")
        elif cfg.kind == "ilu0":
            self.factor_values = ilu0_factor(A)
            L, U = _split_ilu0(A, self.factor_values)
            self._ilu_L = scipy.sparse.linalg.splu(L, permc_spec="NATURAL")
            self._ilu_U = scipy.sparse.linalg.splu(U, permc_spec="NATURAL")
        elif cfg.kind == "direct":
            dense = A.to_dense()
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                self._lu = scipy.linalg.lu_factor(dense)
            if np.any(np.diag(self._lu[0]) == 0.0):
                raise SingularMatrixError("direct smoother: singular matrix")

    def smooth(self, x, b) -> np.ndarray:
        x = np.array(x, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        cfg = self.cfg
        if cfg.kind == "direct":
            return scipy.linalg.lu_solve(self._lu, b)
        for _ in range(cfg.sweeps):
            if cfg.kind == "jacobi":
                x += self._dinv * (b - self._Asp @ x)
            elif cfg.kind == "sgs":
                x += self._fwd.solve(b - self._Asp @ x)
                x += self._bwd.solve(b - self._Asp @ x)
            elif cfg.kind == "ilu0":
                r = b - self._Asp @ x
                x += self._ilu_U.solve(self._ilu_L.solve(r))
        return x

    def apply(self, b) -> np.ndarray:
        """Approximate A^-1 b starting from the zero vector (linear in b)."""
        return self.smooth(np.zeros(self.A.num_rows), b)


def point_smooth(cfg: PointSmootherConfig, A: SparseMatrix, x, b) -> np.ndarray:
    return PointSmoother(cfg, A).smooth(x, b)


# -- Schur operator -----------------------------------------------------------


def a_hat_diagonal(K: SparseMatrix, mode: str) -> np.ndarray:
    if mode == "plain_diag":
        d = extract_diagonal(K, "plain")
        if np.any(d == 0.0):
            raise SingularMatrixError("a_hat: zero diagonal entry")
        return d
    if mode == "abs_rowsum":
        return extract_diagonal(K, "abs_rowsum")
    raise ValueError(f"a_hat_diagonal: unsupported mode {mode!r}")


def build_schur(op, a_hat_mode: str = "plain_diag", alpha: float = 1.0, scale_with_alpha: bool = False, a_hat_scale: float = 1.0) -> SchurOperator:
    """S_tilde = scale * Cz + scale * B2 diag(a_hat_inv) B1, scale in {1, alpha}.

    `a_hat_scale` premultiplies the diagonal approximation (Braess-Sarazin
    uses alpha * diag(K)).  Mode 'exact' builds the true Schur complement from
    the dense inverse of K (test-scale only).
    """
    if isinstance(op, SaddleSystem):
        op = op.op
    scale = alpha if scale_with_alpha else 1.0
    if a_hat_mode == "exact":
        Kinv = np.linalg.inv(op.K.to_dense())
        S = scale * (op.Cz.to_dense() + op.B2.to_dense() @ Kinv @ op.B1.to_dense())
        return SchurOperator(SparseMatrix.from_dense(S), None)
    a_hat = a_hat_scale * a_hat_diagonal(op.K, a_hat_mode)
    ainv = 1.0 / a_hat
    S = scale * op.Cz.to_scipy() + scale * (
        op.B2.to_scipy() @ scipy.sparse.diags(ainv) @ op.B1.to_scipy()
    )
    return SchurOperator(SparseMatrix.from_scipy(S), ainv)


# -- block smoothers ----------------------------------------------------------


class BlockSmoother:
    """Bound block smoother: configuration plus one saddle operator.

    `predictor_solver` may override the configured predictor with any object
    exposing apply(rhs) (used by the nested preconditioner, where a scalar AMG
    V-cycle approximates the stiffness-block inverse).
    """

    def __init__(self, cfg: BlockSmootherConfig, op, predictor_solver=None):
        if isinstance(op, SaddleSystem):
            op = op.op
        self.cfg = cfg
        self.op = op
        mode = cfg.effective_a_hat_mode()

        if cfg.kind == "uzawa":
            self.schur = build_schur(op, mode, cfg.alpha, scale_with_alpha=False)
        elif cfg.kind == "braess_sarazin":
            self.schur = build_schur(
                op, mode, cfg.alpha, scale_with_alpha=False, a_hat_scale=cfg.alpha
            )
        else:  # simple / simplec
            self.schur = build_schur(op, mode, cfg.alpha, scale_with_alpha=True)

        if mode == "exact":
            self._a_hat_solve = PointSmoother(PointSmootherConfig(kind="direct"), op.K).apply
        else:
            ahat = a_hat_diagonal(op.K, mode)
            self._a_hat_solve = lambda r, ainv=(1.0 / ahat): ainv * r

        if cfg.kind == "braess_sarazin":
            self.predictor = None  # hard-coded damped Jacobi with plain diag(K)
        elif predictor_solver is not None:
            self.predictor = predictor_solver
        else:
            self.predictor = PointSmoother(cfg.predictor, op.K)
        self.corrector = PointSmoother(cfg.corrector, self.schur.S_tilde)

    # one algorithmic sweep per kind ---------------------------------------

    def _step_uzawa(self, x: BlockVector, b: BlockVector) -> BlockVector:
        op, alpha = self.op, self.cfg.alpha
        r = op.residual(x, b)
        du = self.predictor.apply(r.u)
        rhs_corr = r.lam - op.B2.to_scipy() @ du
        dlam = self.corrector.apply(-rhs_corr)
        return BlockVector(x.u + alpha * du, x.lam + alpha * dlam)

    def _step_braess_sarazin(self, x: BlockVector, b: BlockVector) -> BlockVector:
        op, alpha = self.op, self.cfg.alpha
        r_u = b.u - op.K.to_scipy() @ x.u - op.B1.to_scipy() @ x.lam
        u_half = x.u + self._a_hat_solve(r_u) / alpha
        rhs_corr = b.lam + op.Cz.to_scipy() @ x.lam - op.B2.to_scipy() @ u_half
        dlam = self.corrector.apply(-rhs_corr)
        lam_new = x.lam + dlam
        u_new = u_half - self._a_hat_solve(op.B1.to_scipy() @ dlam) / alpha
        return BlockVector(u_new, lam_new)

    def _step_simple(self, x: BlockVector, b: BlockVector) -> BlockVector:
        # predictor in increment form: identical to the half-step solve for an
        # exact inner solver, and it keeps consistent iterates fixed when the
        # inner solver is inexact (zero-start cheap smoothers)
        op, alpha = self.op, self.cfg.alpha
        r_u = b.u - op.K.to_scipy() @ x.u - op.B1.to_scipy() @ x.lam
        u_half = x.u + self.predictor.apply(r_u)
        rhs_corr = b.lam + op.Cz.to_scipy() @ x.lam - op.B2.to_scipy() @ u_half
        dlam = self.corrector.apply(-rhs_corr)
        lam_new = x.lam + alpha * dlam
        u_new = u_half - alpha * self._a_hat_solve(op.B1.to_scipy() @ dlam)
        return BlockVector(u_new, lam_new)

    def sweep(self, x: BlockVector, b: BlockVector) -> BlockVector:
        step = {
            "uzawa": self._step_uzawa,
            "braess_sarazin": self._step_braess_sarazin,
            "simple": self._step_simple,
            "simplec": self._step_simple,
        }[self.cfg.kind]
        out = x.copy()
        for _ in range(self.cfg.outer_sweeps):
            out = step(out, b)
        return out

    def apply(self, b: BlockVector) -> BlockVector:
        return self.sweep(BlockVector.zeros(self.op.n_u, self.op.n_lam), b)


def uzawa_sweep(sys, cfg: BlockSmootherConfig, x: BlockVector, b: BlockVector) -> BlockVector:
    return BlockSmoother(cfg, sys).sweep(x, b)


def braess_sarazin_sweep(sys, cfg: BlockSmootherConfig, x: BlockVector, b: BlockVector) -> BlockVector:
    return BlockSmoother(cfg, sys).sweep(x, b)


def simple_sweep(sys, cfg: BlockSmootherConfig, x: BlockVector, b: BlockVector) -> BlockVector:
    return BlockSmoother(cfg, sys).sweep(x, b)


# -- dense error-matrix oracle ---------------------------------------------


def preconditioning_matrix(sys, cfg: BlockSmootherConfig) -> np.ndarray:
    """Dense block preconditioning matrix M from the smoother's defining equation."""
    op = sys.op if isinstance(sys, SaddleSystem) else sys
    K = op.K.to_dense()
    B1 = op.B1.to_dense()
    B2 = op.B2.to_dense()
    Cz = op.Cz.to_dense()
    alpha = cfg.alpha
    mode = cfg.effective_a_hat_mode()
    if mode == "exact":
        A_hat = K
    else:
        A_hat = np.diag(a_hat_diagonal(op.K, mode))
    A_hat_inv = np.linalg.inv(A_hat)
    n_u, n_lam = op.n_u, op.n_lam

    if cfg.kind == "uzawa":
        S = Cz + B2 @ A_hat_inv @ B1
        M = np.block([[K, np.zeros((n_u, n_lam))], [B2, -S]]) / alpha
    elif cfg.kind == "braess_sarazin":
        M = np.block([[alpha * A_hat, B1], [B2, -Cz]])
    else:
        S = alpha * (Cz + B2 @ A_hat_inv @ B1)
        left = np.block([[K, np.zeros((n_u, n_lam))], [B2, -S]])
        right = np.block(
            [
                [np.eye(n_u), A_hat_inv @ B1],
                [np.zeros((n_lam, n_u)), np.eye(n_lam) / alpha],
            ]
        )
        M = left @ right
    return M


def error_matrix(sys, cfg: BlockSmootherConfig) -> np.ndarray:
    """E = A - M for the configured smoother (dense, test-scale oracle)."""
    op = sys.op if isinstance(sys, SaddleSystem) else sys
    return op.merged_dense() - preconditioning_matrix(sys, cfg)
