import numpy as np
import pytest

from contactamg.aggregation import (
    Aggregation,
    aggregate_greedy,
    filtered_node_graph,
)
from contactamg.errors import SetupError, SingularMatrixError
from contactamg.problem import MeshSpec, assemble_elasticity, build_mesh, build_system
from contactamg.saddle import SaddleOperator
from contactamg.sparse import SparseMatrix, sp_transpose
from contactamg.transfer import (
    NULLSPACE_CONSTANT_PER_COMPONENT,
    NULLSPACE_RIGID_BODY_2D,
    BlockTransfer,
    build_block_transfer,
    build_nullspace,
    coarsen_block,
    smooth_prolongator,
    tentative_prolongator,
)


def laplacian_1d(n):
    M = np.zeros((n, n))
    for i in range(n):
        M[i, i] = 2.0
        if i + 1 < n:
            M[i, i + 1] = M[i + 1, i] = -1.0
    return SparseMatrix.from_dense(M)


# -- null spaces ---------------------------------------------------------------


def test_rigid_body_nullspace_at_origin():
    ns = build_nullspace(np.array([[0.0, 0.0]]), NULLSPACE_RIGID_BODY_2D)
    assert ns.vectors.shape == (2, 3)
    assert np.allclose(ns.vectors[:, 2], 0.0)  # rotation column vanishes at origin


def test_rigid_body_nullspace_in_stiffness_kernel():
    spec = MeshSpec(slave_elems=(3, 2), master_elems=(3, 2), angle=0.3)
    p = build_mesh(spec)
    K = assemble_elasticity(p, spec, apply_dirichlet=False)
    ns = build_nullspace(p.node_coords, NULLSPACE_RIGID_BODY_2D)
    scale = np.abs(K.to_dense()).max()
    for c in range(3):
        v = ns.vectors[:, c]
        assert np.abs(K.to_scipy() @ v).max() <= 1e-10 * scale * max(1.0, np.abs(v).max())


def test_constant_per_component_nullspace():
    ns = build_nullspace(3, NULLSPACE_CONSTANT_PER_COMPONENT, dofs_per_node=2)
    assert ns.vectors.shape == (6, 2)
    assert np.array_equal(ns.vectors[:, 0], [1, 0, 1, 0, 1, 0])
    assert np.array_equal(ns.vectors[:, 1], [0, 1, 0, 1, 0, 1])
    # disjoint unit patterns
    assert np.all(ns.vectors[:, 0] * ns.vectors[:, 1] == 0)


# -- tentative prolongator -------------------------------------------------------


def test_single_aggregate_constant_vector():
    n = 4
    aggs = Aggregation(np.zeros(n, dtype=np.int64), 1, np.array([0]))
    ns = build_nullspace(n, NULLSPACE_CONSTANT_PER_COMPONENT, dofs_per_node=1)
    res = tentative_prolongator(aggs, ns, dofs_per_node=1)
    assert np.allclose(np.abs(res.P.to_dense()), np.full((n, 1), 1 / np.sqrt(n)))
    assert np.allclose(np.abs(res.coarse_ns.vectors), [[np.sqrt(n)]])


def test_orthonormal_columns_and_reproduction():
    spec = MeshSpec(slave_elems=(4, 4), master_elems=(4, 4))
    p = build_mesh(spec)
    K = assemble_elasticity(p, spec)
    g = filtered_node_graph(K, np.arange(p.n_u) // 2, p.num_nodes, p.node_body)
    aggs = aggregate_greedy(g, 6)
    ns = build_nullspace(p.node_coords, NULLSPACE_RIGID_BODY_2D)
    res = tentative_prolongator(aggs, ns, dofs_per_node=2)
    PtP = res.P.to_dense().T @ res.P.to_dense()
    assert np.abs(PtP - np.eye(res.P.num_cols)).max() <= 1e-12
    recon = res.P.to_dense() @ res.coarse_ns.vectors
    assert np.abs(recon - ns.vectors).max() <= 1e-12 * max(1.0, np.abs(ns.vectors).max())


def test_two_aggregates_single_column_disjoint_support():
    aggs = Aggregation(np.array([0, 0, 1, 1]), 2, np.array([0, 2]))
    ns = build_nullspace(4, NULLSPACE_CONSTANT_PER_COMPONENT, dofs_per_node=1)
    res = tentative_prolongator(aggs, ns, dofs_per_node=1)
    P = res.P.to_dense()
    assert P.shape == (4, 2)
    assert np.all(np.count_nonzero(P, axis=1) == 1)


def test_rank_deficient_single_node_aggregate():
    # one node cannot carry all three rigid-body modes: one column is dropped
    coords = np.array([[1.0, 2.0]])
    ns = build_nullspace(coords, NULLSPACE_RIGID_BODY_2D)
    aggs = Aggregation(np.array([0]), 1, np.array([0]))
    res = tentative_prolongator(aggs, ns, dofs_per_node=2)
    assert res.P.num_cols == 2
    assert res.dropped_columns == 1
    # reproduction still exact for the retained space
    recon = res.P.to_dense() @ res.coarse_ns.vectors
    assert np.abs(recon - ns.vectors).max() <= 1e-12 * max(1.0, np.abs(ns.vectors).max())


def test_incomplete_aggregation_rejected():
    from contactamg.aggregation import UNASSIGNED

    aggs = Aggregation(np.array([0, UNASSIGNED]), 1, np.array([0]))
    ns = build_nullspace(2, NULLSPACE_CONSTANT_PER_COMPONENT, dofs_per_node=1)
    with pytest.raises(SetupError):
        tentative_prolongator(aggs, ns, dofs_per_node=1)


# -- prolongator smoothing -------------------------------------------------------


def test_smoothing_omega_zero_is_identity():
    A = laplacian_1d(6)
    aggs = Aggregation(np.repeat([0, 1], 3), 2, np.array([0, 3]))
    ns = build_nullspace(6, NULLSPACE_CONSTANT_PER_COMPONENT, dofs_per_node=1)
    P_tent = tentative_prolongator(aggs, ns, dofs_per_node=1).P
    P, lam = smooth_prolongator(P_tent, A, 0.0)
    assert P is P_tent


def test_smoothing_identity_operator_annihilates():
    # A = I: lambda_max = 1, so P = P_tent - 1 * P_tent = 0
    A = SparseMatrix.identity(4)
    aggs = Aggregation(np.array([0, 0, 1, 1]), 2, np.array([0, 2]))
    ns = build_nullspace(4, NULLSPACE_CONSTANT_PER_COMPONENT, dofs_per_node=1)
    P_tent = tentative_prolongator(aggs, ns, dofs_per_node=1).P
    P, lam = smooth_prolongator(P_tent, A, 1.0)
    assert lam == pytest.approx(1.0)
    assert np.abs(P.to_dense()).max() <= 1e-14


def test_smoothing_widens_support():
    A = laplacian_1d(8)
    aggs = Aggregation(np.repeat([0, 1], 4), 2, np.array([0, 4]))
    ns = build_nullspace(8, NULLSPACE_CONSTANT_PER_COMPONENT, dofs_per_node=1)
    P_tent = tentative_prolongator(aggs, ns, dofs_per_node=1).P
    P, lam = smooth_prolongator(P_tent, A, 4.0 / 3.0)
    dense_t, dense_s = P_tent.to_dense(), P.to_dense()
    # both columns reach across the aggregate boundary after smoothing
    assert dense_t[4, 0] == 0.0 and dense_s[4, 0] != 0.0
    assert dense_t[3, 1] == 0.0 and dense_s[3, 1] != 0.0
    assert lam > 0.0


def test_smoothing_zero_diagonal_error():
    A = SparseMatrix.from_dense([[0.0, 1.0], [1.0, 0.0]])
    P = SparseMatrix.from_dense([[1.0], [1.0]])
    with pytest.raises(SingularMatrixError):
        smooth_prolongator(P, A, 1.0)


# -- block transfer / Galerkin ---------------------------------------------------


def build_level(spec=None, min_agg=4, smooth=False):
    spec = spec or MeshSpec(slave_elems=(4, 2), master_elems=(4, 2))
    prob, system = build_system(spec)
    g = filtered_node_graph(system.K, np.arange(prob.n_u) // 2, prob.num_nodes, prob.node_body)
    disp = aggregate_greedy(g, min_agg)
    ns_u = build_nullspace(prob.node_coords, NULLSPACE_RIGID_BODY_2D)
    res_u = tentative_prolongator(disp, ns_u, dofs_per_node=2)
    P_u = res_u.P
    if smooth:
        P_u, _ = smooth_prolongator(P_u, system.K, 4.0 / 3.0)

    from contactamg.aggregation import LagrangeMap, aggregate_lagrange

    n_s = len(prob.slave_nodes)
    lmap = LagrangeMap(
        slave_dofs=np.sort(np.concatenate([2 * prob.slave_nodes, 2 * prob.slave_nodes + 1])),
        row_node=np.repeat(prob.slave_nodes, 2),
        lm_node_of_lm_dof=np.arange(2 * n_s, dtype=np.int64) // 2,
    )
    lam_aggs = aggregate_lagrange(disp, prob.D, lmap)
    ns_l = build_nullspace(n_s, NULLSPACE_CONSTANT_PER_COMPONENT, dofs_per_node=2)
    res_l = tentative_prolongator(lam_aggs, ns_l, dofs_per_node=2)
    T = build_block_transfer(P_u, res_l.P)
    return prob, system, T


def test_identity_transfer_reproduces_fine_operator():
    _, system, _ = build_level()
    n_u, n_lam = system.n_u, system.n_lam
    T = build_block_transfer(SparseMatrix.identity(n_u), SparseMatrix.identity(n_lam))
    coarse = coarsen_block(system.op, T)
    assert np.allclose(coarse.K.to_dense(), system.K.to_dense())
    assert np.allclose(coarse.B1.to_dense(), system.B1.to_dense())
    assert np.allclose(coarse.B2.to_dense(), system.B2.to_dense())
    assert np.allclose(coarse.Cz.to_dense(), system.Cz.to_dense())


def test_transfer_dimensions_and_transpose():
    _, _, T = build_level()
    assert T.R_u.num_rows == T.P_u.num_cols
    assert T.R_u.num_cols == T.P_u.num_rows
    assert np.allclose(T.R_u.to_dense(), T.P_u.to_dense().T)
    assert np.allclose(T.R_lam.to_dense(), T.P_lam.to_dense().T)


def test_no_field_mixing():
    _, system, T = build_level()
    r_u = np.random.default_rng(0).standard_normal(system.n_u)
    c_u, c_lam = T.restrict(r_u, np.zeros(system.n_lam))
    assert np.abs(c_lam).max() == 0.0


def test_blockwise_equals_monolithic_galerkin():
    for smooth in (False, True):
        _, system, T = build_level(smooth=smooth)
        coarse = coarsen_block(system.op, T)
        merged_T = np.block(
            [
                [T.P_u.to_dense(), np.zeros((system.n_u, T.n_coarse_lam))],
                [np.zeros((system.n_lam, T.n_coarse_u)), T.P_lam.to_dense()],
            ]
        )
        A = system.op.merged_dense()
        ref = merged_T.T @ A @ merged_T
        got = coarse.merged_dense()
        assert np.abs(got - ref).max() <= 1e-13 * max(1.0, np.abs(ref).max())


def test_coarse_stiffness_symmetric():
    _, system, T = build_level()
    K_c = coarsen_block(system.op, T).K.to_dense()
    assert np.abs(K_c - K_c.T).max() <= 1e-13 * max(1.0, np.abs(K_c).max())


def test_zero_cz_stays_zero_with_identity_lambda_transfer():
    rng = np.random.default_rng(2)
    K = SparseMatrix.from_dense(np.eye(6) * 2)
    B1 = SparseMatrix.from_dense(rng.standard_normal((6, 2)))
    B2 = SparseMatrix.from_dense(rng.standard_normal((2, 6)))
    Cz = SparseMatrix.zeros(2, 2)
    op = SaddleOperator(K, B1, B2, Cz)
    P_u = SparseMatrix.from_dense(np.vstack([np.eye(3), np.eye(3)]))
    T = build_block_transfer(P_u, SparseMatrix.identity(2))
    coarse = coarsen_block(op, T)
    assert coarse.Cz.nnz == 0
