import numpy as np
import pytest
import scipy.linalg
import scipy.sparse

from contactamg.errors import DimensionError, SingularMatrixError
from contactamg.sparse import (
    BlockVector,
    SparseMatrix,
    axpy,
    dense_lu_solve,
    dot,
    extract_diagonal,
    galerkin_triple,
    norm2,
    read_matrix_market,
    read_vector,
    sp_matmul,
    sp_transpose,
    spmv,
    write_matrix_market,
    write_vector,
)


def random_sparse(rng, m, n, density=0.3):
    nnz = max(1, int(density * m * n))
    rows = rng.integers(0, m, nnz)
    cols = rng.integers(0, n, nnz)
    vals = rng.standard_normal(nnz)
    return SparseMatrix.from_coo(rows, cols, vals, (m, n))


def test_csr_invariants_after_construction():
    rng = np.random.default_rng(7)
    A = random_sparse(rng, 13, 9)
    assert A.row_offsets[0] == 0
    assert A.row_offsets[-1] == A.nnz == len(A.col_indices)
    assert np.all(np.diff(A.row_offsets) >= 0)
    for i in range(A.num_rows):
        cols = A.col_indices[A.row_offsets[i] : A.row_offsets[i + 1]]
        assert np.all(np.diff(cols) > 0)  # strictly increasing => no duplicates
        assert np.all(cols < A.num_cols)


def test_values_are_immutable():
    A = SparseMatrix.identity(3)
    with pytest.raises(ValueError):
        A.values[0] = 5.0


def test_spmv_identity_and_zero():
    assert np.array_equal(spmv(SparseMatrix.identity(3), [1, 2, 3]), [1, 2, 3])
    assert np.array_equal(spmv(SparseMatrix.zeros(2, 2), [5, 7]), [0, 0])


def test_spmv_hand_case():
    A = SparseMatrix.from_dense([[2, 0], [1, 3]])
    assert np.array_equal(spmv(A, [1, 1]), [2, 4])


def test_spmv_dimension_mismatch():
    with pytest.raises(DimensionError):
        spmv(SparseMatrix.identity(3), [1, 2])


def test_transpose_identity_and_single_entry():
    I4 = SparseMatrix.identity(4)
    assert np.array_equal(sp_transpose(I4).to_dense(), np.eye(4))
    A = SparseMatrix.from_dense([[0, 1], [0, 0]])
    assert np.array_equal(sp_transpose(A).to_dense(), [[0, 0], [1, 0]])


def test_transpose_roundtrip_random():
    rng = np.random.default_rng(42)
    A = random_sparse(rng, 10, 7)
    B = sp_transpose(sp_transpose(A))
    assert np.array_equal(A.to_dense(), B.to_dense())
    assert np.array_equal(A.row_offsets, B.row_offsets)
    assert np.array_equal(A.col_indices, B.col_indices)
    assert np.array_equal(A.values, B.values)


def test_matmul_identity_and_permutation():
    rng = np.random.default_rng(3)
    A = random_sparse(rng, 6, 6)
    assert np.allclose(sp_matmul(A, SparseMatrix.identity(6)).to_dense(), A.to_dense())
    perm = np.eye(5)[[2, 0, 4, 1, 3]]
    P = SparseMatrix.from_dense(perm)
    Pinv = SparseMatrix.from_dense(perm.T)
    assert np.array_equal(sp_matmul(P, Pinv).to_dense(), np.eye(5))


def test_matmul_against_dense_oracle():
    rng = np.random.default_rng(11)
    A = random_sparse(rng, 8, 6)
    B = random_sparse(rng, 6, 5)
    C = sp_matmul(A, B)
    ref = A.to_dense() @ B.to_dense()
    assert np.max(np.abs(C.to_dense() - ref)) <= 1e-13


def test_matmul_dense_equivalence_many_random_pairs():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        m, k, n = rng.integers(1, 21, 3)
        A = random_sparse(rng, m, k)
        B = random_sparse(rng, k, n)
        ref = A.to_dense() @ B.to_dense()
        got = sp_matmul(A, B).to_dense()
        scale = max(1.0, np.max(np.abs(ref)))
        assert np.max(np.abs(got - ref)) <= 1e-13 * scale


def test_matmul_dimension_mismatch():
    with pytest.raises(DimensionError):
        sp_matmul(SparseMatrix.identity(3), SparseMatrix.identity(4))


def test_galerkin_identity_and_composition():
    rng = np.random.default_rng(5)
    A = random_sparse(rng, 7, 7)
    I7 = SparseMatrix.identity(7)
    assert np.allclose(galerkin_triple(I7, A, I7).to_dense(), A.to_dense())
    R = random_sparse(rng, 4, 7)
    P = random_sparse(rng, 7, 4)
    assert np.allclose(
        galerkin_triple(R, A, P).to_dense(),
        sp_matmul(sp_matmul(R, A), P).to_dense(),
    )


def test_galerkin_aggregate_of_all():
    n = 6
    P = SparseMatrix.from_dense(np.ones((n, 1)))
    out = galerkin_triple(sp_transpose(P), SparseMatrix.identity(n), P)
    assert out.shape == (1, 1)
    assert np.allclose(out.to_dense(), [[n]])


def test_galerkin_symmetry_for_symmetric_input():
    rng = np.random.default_rng(9)
    M = rng.standard_normal((10, 10))
    A = SparseMatrix.from_dense(M + M.T)
    P = random_sparse(rng, 10, 4)
    Ac = galerkin_triple(sp_transpose(P), A, P).to_dense()
    assert np.max(np.abs(Ac - Ac.T)) <= 1e-13 * max(1.0, np.max(np.abs(Ac)))


def test_extract_diagonal():
    assert np.array_equal(extract_diagonal(SparseMatrix.identity(3), "plain"), [1, 1, 1])
    A = SparseMatrix.from_dense([[2, -1], [-1, 2]])
    assert np.array_equal(extract_diagonal(A, "abs_rowsum"), [3, 3])
    B = SparseMatrix.from_dense([[1, 0], [0, -5]])
    assert np.array_equal(extract_diagonal(B, "plain"), [1, -5])


def test_extract_diagonal_abs_dominates_plain():
    rng = np.random.default_rng(13)
    for _ in range(20):
        n = int(rng.integers(2, 12))
        M = rng.standard_normal((n, n))
        np.fill_diagonal(M, np.abs(np.diag(M)) + 0.1)
        A = SparseMatrix.from_dense(M)
        assert np.all(
            extract_diagonal(A, "abs_rowsum") >= np.abs(extract_diagonal(A, "plain"))
        )


def test_extract_diagonal_zero_row_error():
    A = SparseMatrix.from_dense([[1, 0], [0, 0]])
    with pytest.raises(SingularMatrixError):
        extract_diagonal(A, "abs_rowsum")


def test_dense_lu_identity_and_hand_case():
    assert np.allclose(dense_lu_solve(np.eye(2), [3, 4]), [3, 4])
    assert np.allclose(dense_lu_solve([[2, 1], [1, 3]], [3, 4]), [1, 1])


def test_dense_lu_hilbert_recovery():
    H = scipy.linalg.hilbert(4)
    x = np.ones(4)
    got = dense_lu_solve(H, H @ x)
    assert np.max(np.abs(got - x)) <= 1e-8


def test_dense_lu_residual_bound():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((12, 12)) + 12 * np.eye(12)
    b = rng.standard_normal(12)
    x = dense_lu_solve(A, b)
    assert np.max(np.abs(A @ x - b)) <= 1e-10 * max(1.0, np.max(np.abs(b)))


def test_dense_lu_singular():
    with pytest.raises(SingularMatrixError):
        dense_lu_solve([[1.0, 2.0], [2.0, 4.0]], [1.0, 1.0])


def test_vec_ops():
    assert dot([1, 2], [3, 4]) == 11
    assert norm2([3, 4]) == 5
    assert norm2([]) == 0.0
    assert np.array_equal(axpy(2, [1, 1], [0, 1]), [2, 3])
    with pytest.raises(DimensionError):
        dot([1], [1, 2])
    with pytest.raises(DimensionError):
        axpy(1.0, [1], [1, 2])


def test_block_vector_roundtrip():
    bv = BlockVector([1.0, 2.0], [3.0])
    assert np.array_equal(bv.merged(), [1, 2, 3])
    back = BlockVector.from_merged(bv.merged(), 2)
    assert np.array_equal(back.u, bv.u)
    assert np.array_equal(back.lam, bv.lam)
    assert len(bv) == 3


def test_matrix_market_roundtrip(tmp_path):
    rng = np.random.default_rng(77)
    A = random_sparse(rng, 9, 5)
    path = tmp_path / "A.mtx"
    write_matrix_market(path, A)
    B = read_matrix_market(path)
    assert np.allclose(A.to_dense(), B.to_dense(), rtol=0, atol=1e-14)
    # on-disk indices are 1-based
    body = [
        line
        for line in path.read_text().splitlines()
        if line.strip() and not line.startswith("%")
    ]
    first_entry = body[1].split()
    assert int(first_entry[0]) >= 1 and int(first_entry[1]) >= 1


def test_vector_roundtrip(tmp_path):
    v = np.array([1.5, -2.0, 0.0, 3.25])
    path = tmp_path / "v.vec"
    write_vector(path, v)
    assert np.array_equal(read_vector(path), v)
