"""Fully coupled AMG hierarchy over saddle-point operators and its V-cycle.

Each level couples an interface-respecting displacement aggregation with the
mortar-driven Lagrange-multiplier aggregation, builds segregated transfers
(optionally smoothed displacement prolongators, plain multiplier transfers),
and coarsens all four blocks by the blockwise Galerkin product.  Below the
finest level the multiplier aggregation consumes a surrogate for the mortar
matrix recovered from the nonzero slave-body rows of the coarse B1 block.

The nested comparison preconditioner applies the block smoother on the finest
level only, with a scalar AMG V-cycle on the stiffness block as predictor.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .aggregation import (
    UNASSIGNED,
    LagrangeMap,
    aggregate_greedy,
    aggregate_lagrange,
    filtered_node_graph,
)
from .errors import ConfigError, SetupError
from .problem import BODY_SLAVE, ContactProblem
from .saddle import SaddleOperator, SaddleSystem
from .smoothers import BlockSmoother, BlockSmootherConfig, PointSmoother, PointSmootherConfig
from .sparse import BlockVector, SparseMatrix, dense_lu_solve
from .transfer import (
    NULLSPACE_CONSTANT_PER_COMPONENT,
    NULLSPACE_RIGID_BODY_2D,
    BlockTransfer,
    NullSpace,
    build_block_transfer,
    build_nullspace,
    coarsen_block,
    smooth_prolongator,
    tentative_prolongator,
)

COARSE_SOLVERS = ("merged_lu", "block_smoother")


@dataclass(frozen=True)
class HierarchyConfig:
    max_levels: int = 3
    max_coarse_size: int = 500
    coarse_solver: str = "merged_lu"
    min_agg_size: int = 6
    smooth_displacement_transfers: bool = True
    omega: float = 4.0 / 3.0
    eps_drop: float = 0.0

    def __post_init__(self):
        if self.max_levels < 1:
            raise ConfigError("max_levels must be >= 1")
        if self.max_coarse_size < 1:
            raise ConfigError("max_coarse_size must be >= 1")
        if self.coarse_solver not in COARSE_SOLVERS:
            raise ConfigError(f"unknown coarse solver: {self.coarse_solver!r}")
        if self.min_agg_size < 1:
            raise ConfigError("min_agg_size must be >= 1")


@dataclass
class LevelMeta:
    """DOF/node bookkeeping a level needs to coarsen itself."""

    u_dof_node: np.ndarray
    num_u_nodes: int
    node_body: np.ndarray
    lam_dof_node: np.ndarray
    num_lam_nodes: int
    ns_u: NullSpace
    ns_lam: NullSpace
    mortar_block: SparseMatrix
    lmap: LagrangeMap


@dataclass
class Level:
    op: SaddleOperator
    transfer: BlockTransfer | None
    smoother: BlockSmoother
    pre_sweeps: int
    post_sweeps: int
    meta: LevelMeta
    info: dict = field(default_factory=dict)


class Hierarchy:
    def __init__(self, levels, coarse_solver, coarse_lu, complexity, report):
        self.levels = levels
        self.coarse_solver = coarse_solver
        self._coarse_lu = coarse_lu
        self.complexity = complexity
        self.report = report

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    def solve_coarsest(self, x: BlockVector, b: BlockVector) -> BlockVector:
        lvl = self.levels[-1]
        if self.coarse_solver == "merged_lu":
            sol = scipy.linalg.lu_solve(self._coarse_lu, b.merged())
            return BlockVector.from_merged(sol, lvl.op.n_u)
        return lvl.smoother.sweep(x, b)

    def apply(self, r) -> np.ndarray:
        """Preconditioner application: one V-cycle from zero on merged vectors."""
        fine = self.levels[0].op
        b = BlockVector.from_merged(np.asarray(r, dtype=np.float64), fine.n_u)
        x = vcycle(self, 0, BlockVector.zeros(fine.n_u, fine.n_lam), b)
        return x.merged()


def fine_level_meta(problem: ContactProblem) -> LevelMeta:
    n_u = problem.n_u
    n_s = len(problem.slave_nodes)
    slave_dofs = np.sort(
        np.concatenate([2 * problem.slave_nodes, 2 * problem.slave_nodes + 1])
    )
    lmap = LagrangeMap(
        slave_dofs=slave_dofs,
        row_node=np.repeat(problem.slave_nodes, 2),
        lm_node_of_lm_dof=np.arange(2 * n_s, dtype=np.int64) // 2,
    )
    return LevelMeta(
        u_dof_node=np.arange(n_u, dtype=np.int64) // 2,
        num_u_nodes=problem.num_nodes,
        node_body=problem.node_body.copy(),
        lam_dof_node=np.arange(2 * n_s, dtype=np.int64) // 2,
        num_lam_nodes=n_s,
        ns_u=build_nullspace(problem.node_coords, NULLSPACE_RIGID_BODY_2D),
        ns_lam=build_nullspace(n_s, NULLSPACE_CONSTANT_PER_COMPONENT, dofs_per_node=2),
        mortar_block=problem.D,
        lmap=lmap,
    )


def _coarse_meta(op_coarse, res_u, res_lam, disp_aggs, lam_aggs, meta: LevelMeta) -> LevelMeta:
    num_u_nodes = disp_aggs.num_aggs
    node_body = np.full(num_u_nodes, -1, dtype=np.int8)
    node_body[disp_aggs.node_to_agg] = meta.node_body
    u_dof_node = res_u.coarse_dof_agg
    lam_dof_node = res_lam.coarse_dof_agg

    # mortar surrogate: nonzero slave-body rows of the coarse B1 block
    B1c = op_coarse.B1.to_scipy()
    row_nnz = np.diff(B1c.indptr)
    slave_side = (node_body[u_dof_node] == BODY_SLAVE) & (row_nnz > 0)
    rows = np.where(slave_side)[0]
    if len(rows) == 0:
        raise SetupError("coarse level lost the slave interface (empty mortar surrogate)")
    surrogate = SparseMatrix.from_scipy(B1c[rows, :])
    lmap = LagrangeMap(
        slave_dofs=rows.astype(np.int64),
        row_node=u_dof_node[rows],
        lm_node_of_lm_dof=lam_dof_node,
    )
    return LevelMeta(
        u_dof_node=u_dof_node,
        num_u_nodes=num_u_nodes,
        node_body=node_body,
        lam_dof_node=lam_dof_node,
        num_lam_nodes=lam_aggs.num_aggs,
        ns_u=res_u.coarse_ns,
        ns_lam=res_lam.coarse_ns,
        mortar_block=surrogate,
        lmap=lmap,
    )


def setup(
    system,
    meta: LevelMeta,
    cfg: HierarchyConfig,
    smoother_cfg: BlockSmootherConfig,
    pre_sweeps: int = 1,
    post_sweeps: int = 1,
) -> Hierarchy:
    """Build the fully coupled hierarchy for a saddle system."""
    op = system.op if isinstance(system, SaddleSystem) else system
    levels = []
    report_lines = []

    while True:
        at_last = len(levels) + 1 >= cfg.max_levels or op.total_rows < cfg.max_coarse_size
        if at_last:
            levels.append(
                Level(op, None, BlockSmoother(smoother_cfg, op), pre_sweeps, post_sweeps, meta)
            )
            break

        graph = filtered_node_graph(
            op.K, meta.u_dof_node, meta.num_u_nodes, meta.node_body, eps_drop=cfg.eps_drop
        )
        disp_aggs = aggregate_greedy(graph, cfg.min_agg_size)
        if disp_aggs.num_aggs == 0:
            raise SetupError("displacement aggregation produced no aggregates")
        if disp_aggs.num_aggs >= meta.num_u_nodes:
            # coarsening stalled; treat the current level as coarsest
            levels.append(
                Level(op, None, BlockSmoother(smoother_cfg, op), pre_sweeps, post_sweeps, meta)
            )
            break
        lam_aggs = aggregate_lagrange(disp_aggs, meta.mortar_block, meta.lmap)
        if np.any(lam_aggs.node_to_agg == UNASSIGNED):
            raise SetupError("a multiplier pseudo-node was never referenced by the mortar block")

        res_u = tentative_prolongator(disp_aggs, meta.ns_u, dof_node=meta.u_dof_node)
        P_u = res_u.P
        lam_max = None
        if cfg.smooth_displacement_transfers:
            P_u, lam_max = smooth_prolongator(P_u, op.K, cfg.omega)
        res_lam = tentative_prolongator(lam_aggs, meta.ns_lam, dof_node=meta.lam_dof_node)
        T = build_block_transfer(P_u, res_lam.P)
        op_coarse = coarsen_block(op, T)
        info = {
            "u_aggregates": disp_aggs.num_aggs,
            "lam_aggregates": lam_aggs.num_aggs,
            "u_singletons": disp_aggs.singleton_count,
            "lam_overlap_touches": lam_aggs.overlap_touch_count,
            "lambda_max": lam_max,
            "dropped_ns_columns": res_u.dropped_columns,
        }
        levels.append(
            Level(op, T, BlockSmoother(smoother_cfg, op), pre_sweeps, post_sweeps, meta, info)
        )
        meta = _coarse_meta(op_coarse, res_u, res_lam, disp_aggs, lam_aggs, meta)
        op = op_coarse

    nnz0 = levels[0].op.nnz
    complexity = sum(lvl.op.nnz for lvl in levels) / nnz0

    coarse_lu = None
    if cfg.coarse_solver == "merged_lu":
        import warnings

        dense = levels[-1].op.merged_dense()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            coarse_lu = scipy.linalg.lu_factor(dense)

    for idx, lvl in enumerate(levels):
        parts = (
            f"level {idx}: rows={lvl.op.total_rows} (u={lvl.op.n_u}, lam={lvl.op.n_lam})"
            f" nnz[K]={lvl.op.K.nnz} nnz[B1]={lvl.op.B1.nnz}"
            f" nnz[B2]={lvl.op.B2.nnz} nnz[Cz]={lvl.op.Cz.nnz}"
        )
        if lvl.info:
            parts += (
                f" u_aggs={lvl.info['u_aggregates']} lam_aggs={lvl.info['lam_aggregates']}"
                f" u_singletons={lvl.info['u_singletons']}"
                f" lam_overlaps={lvl.info['lam_overlap_touches']}"
            )
            if lvl.info["lambda_max"] is not None:
                parts += f" lambda_max={lvl.info['lambda_max']:.6g}"
        report_lines.append(parts)
    report_lines.append(f"operator complexity: {complexity:.6g}")
    report_lines.append(f"coarse solver: {cfg.coarse_solver}")

    return Hierarchy(levels, cfg.coarse_solver, coarse_lu, complexity, "\n".join(report_lines))


def vcycle(h: Hierarchy, level: int, x: BlockVector, b: BlockVector) -> BlockVector:
    """One recursive V-cycle pass starting at `level`."""
    lvl = h.levels[level]
    if level == h.num_levels - 1:
        return h.solve_coarsest(x, b)
    for _ in range(lvl.pre_sweeps):
        x = lvl.smoother.sweep(x, b)
    r = lvl.op.residual(x, b)
    rc_u, rc_lam = lvl.transfer.restrict(r.u, r.lam)
    coarse_op = h.levels[level + 1].op
    c = vcycle(h, level + 1, BlockVector.zeros(coarse_op.n_u, coarse_op.n_lam), BlockVector(rc_u, rc_lam))
    pu, plam = lvl.transfer.prolong(c.u, c.lam)
    x = BlockVector(x.u + pu, x.lam + plam)
    for _ in range(lvl.post_sweeps):
        x = lvl.smoother.sweep(x, b)
    return x


# -- scalar AMG on the stiffness block (nested preconditioner) ---------------


@dataclass
class ScalarLevel:
    A: SparseMatrix
    P: SparseMatrix | None
    R: SparseMatrix | None
    smoother: PointSmoother | None


class ScalarHierarchy:
    """Single-field smoothed-aggregation AMG used inside the nested variant."""

    def __init__(self, levels, coarse_lu):
        self.levels = levels
        self._coarse_lu = coarse_lu

    def vcycle(self, level: int, x, b):
        lvl = self.levels[level]
        if level == len(self.levels) - 1:
            return scipy.linalg.lu_solve(self._coarse_lu, b)
        x = lvl.smoother.smooth(x, b)
        r = b - lvl.A.to_scipy() @ x
        c = self.vcycle(level + 1, np.zeros(lvl.P.num_cols), lvl.R.to_scipy() @ r)
        x = x + lvl.P.to_scipy() @ c
        x = lvl.smoother.smooth(x, b)
        return x

    def apply(self, b):
        return self.vcycle(0, np.zeros(len(b)), np.asarray(b, dtype=np.float64))


def build_scalar_hierarchy(
    K: SparseMatrix,
    meta: LevelMeta,
    cfg: HierarchyConfig,
    smoother_cfg: PointSmootherConfig,
) -> ScalarHierarchy:
    levels = []
    A = K
    dof_node = meta.u_dof_node
    num_nodes = meta.num_u_nodes
    node_body = meta.node_body
    ns = meta.ns_u

    while len(levels) + 1 < cfg.max_levels and A.num_rows >= cfg.max_coarse_size:
        graph = filtered_node_graph(A, dof_node, num_nodes, node_body, eps_drop=cfg.eps_drop)
        aggs = aggregate_greedy(graph, cfg.min_agg_size)
        if aggs.num_aggs >= num_nodes:
            break
        res = tentative_prolongator(aggs, ns, dof_node=dof_node)
        P = res.P
        if cfg.smooth_displacement_transfers:
            P, _ = smooth_prolongator(P, A, cfg.omega)
        R = SparseMatrix.from_scipy(P.to_scipy().T)
        A_coarse = SparseMatrix.from_scipy(R.to_scipy() @ A.to_scipy() @ P.to_scipy())
        levels.append(ScalarLevel(A, P, R, PointSmoother(smoother_cfg, A)))
        body = np.full(aggs.num_aggs, -1, dtype=np.int8)
        body[aggs.node_to_agg] = node_body
        A, dof_node, num_nodes, node_body, ns = (
            A_coarse,
            res.coarse_dof_agg,
            aggs.num_aggs,
            body,
            res.coarse_ns,
        )

    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        coarse_lu = scipy.linalg.lu_factor(A.to_dense())
    levels.append(ScalarLevel(A, None, None, None))
    return ScalarHierarchy(levels, coarse_lu)


class NestedPreconditioner:
    """Block smoother on the fine level with an inner scalar AMG predictor."""

    def __init__(self, system, meta: LevelMeta, simple_cfg: BlockSmootherConfig, inner_cfg: HierarchyConfig, inner_smoother: PointSmootherConfig):
        op = system.op if isinstance(system, SaddleSystem) else system
        self.op = op
        self.inner = build_scalar_hierarchy(op.K, meta, inner_cfg, inner_smoother)
        self.outer = BlockSmoother(simple_cfg, op, predictor_solver=self.inner)

    def apply(self, r) -> np.ndarray:
        b = BlockVector.from_merged(np.asarray(r, dtype=np.float64), self.op.n_u)
        return self.outer.apply(b).merged()


def nested_preconditioner(system, meta, simple_cfg, inner_cfg, inner_smoother=None) -> NestedPreconditioner:
    if simple_cfg.kind not in ("simple", "simplec"):
        raise ConfigError("nested preconditioner wraps a SIMPLE-type block smoother")
    inner_smoother = inner_smoother or PointSmootherConfig(kind="sgs", damping=0.8)
    return NestedPreconditioner(system, meta, simple_cfg, inner_cfg, inner_smoother)
