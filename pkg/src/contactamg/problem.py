"""Two-body frictionless contact problem generator on structured 2-D quad meshes.

Generates the linear, fully active saddle-point system: plane-strain
elasticity blocks for two stacked rectangular bodies, boundary mass mortar
matrices on the matching contact interface, normal-gap and tangential
constraint rows, and the block right-hand side driven by the initial
penetration.  The whole configuration can be rotated by an arbitrary angle to
probe frame robustness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AssemblyError, ConfigError, DimensionError
from .saddle import SaddleOperator, SaddleSystem
from .sparse import BlockVector, SparseMatrix

# per-displacement-DOF classification
DOF_INTERIOR_SLAVE = 0
DOF_INTERIOR_MASTER = 1
DOF_SLAVE_INTERFACE = 2
DOF_MASTER_INTERFACE = 3
DOF_DIRICHLET = 4

BODY_SLAVE = 0
BODY_MASTER = 1


@dataclass(frozen=True)
class MeshSpec:
    """Geometry, discretization and material description of the two blocks.

    The slave block sits on top of the master block (stacked along +y before
    rotation); `gap0 > 0` is the initial interpenetration along the interface
    normal, `angle` rotates the whole configuration.
    """

    slave_dims: tuple = (1.0, 0.4)
    master_dims: tuple = (1.0, 0.5)
    slave_elems: tuple = (20, 10)
    master_elems: tuple = (20, 10)
    gap0: float = 0.001
    angle: float = 0.0
    youngs_modulus: float = 1.0e7
    poisson_ratio: float = 0.3

    def validate(self):
        for nx, ny in (self.slave_elems, self.master_elems):
            if nx < 1 or ny < 1:
                raise ConfigError("element counts must be >= 1")
        if not (0.0 < self.poisson_ratio < 0.5):
            raise ConfigError("poisson_ratio must lie in (0, 0.5)")
        if self.youngs_modulus <= 0.0:
            raise ConfigError("youngs_modulus must be positive")
        if self.slave_elems[0] != self.master_elems[0]:
            raise ConfigError(
                "unsupported configuration: interface discretizations do not "
                f"match ({self.slave_elems[0]} vs {self.master_elems[0]} elements)"
            )
        hs = self.slave_dims[0] / self.slave_elems[0]
        hm = self.master_dims[0] / self.master_elems[0]
        if abs(hs - hm) > 1e-12 * max(hs, hm):
            raise ConfigError(
                "unsupported configuration: interface node spacings differ "
                f"({hs} vs {hm}); slave and master widths must agree"
            )


class ContactProblem:
    """Mesh, DOF classification and mortar interface data for one MeshSpec."""

    def __init__(self, spec: MeshSpec):
        spec.validate()
        self.spec = spec
        self._build_geometry(spec)
        self.D, self.M, self.weighted_gaps = assemble_mortar(self, lumped=False)

    # -- geometry -----------------------------------------------------------

    def _build_geometry(self, spec: MeshSpec):
        ws, hs = spec.slave_dims
        wm, hm = spec.master_dims
        nxs, nys = spec.slave_elems
        nxm, nym = spec.master_elems

        def grid(w, h, nx, ny, y0):
            xs = np.linspace(0.0, w, nx + 1)
            ys = np.linspace(y0, y0 + h, ny + 1)
            X, Y = np.meshgrid(xs, ys)  # row-major: node = iy*(nx+1) + ix
            return np.column_stack([X.ravel(), Y.ravel()])

        # slave on top, shifted down by the initial penetration
        slave_coords = grid(ws, hs, nxs, nys, -spec.gap0)
        master_coords = grid(wm, hm, nxm, nym, -hm)
        self.num_slave_nodes = slave_coords.shape[0]
        self.num_master_nodes = master_coords.shape[0]
        self.num_nodes = self.num_slave_nodes + self.num_master_nodes
        coords = np.vstack([slave_coords, master_coords])

        def quads(nx, ny, offset):
            quads = []
            for iy in range(ny):
                for ix in range(nx):
                    n0 = offset + iy * (nx + 1) + ix
                    quads.append((n0, n0 + 1, n0 + nx + 2, n0 + nx + 1))
            return quads

        self.elements = np.array(
            quads(nxs, nys, 0) + quads(nxm, nym, self.num_slave_nodes), dtype=np.int64
        )

        self.node_body = np.concatenate(
            [
                np.full(self.num_slave_nodes, BODY_SLAVE, dtype=np.int8),
                np.full(self.num_master_nodes, BODY_MASTER, dtype=np.int8),
            ]
        )

        # interface rows: slave bottom (iy = 0), master top (iy = nym)
        self.slave_nodes = np.arange(nxs + 1, dtype=np.int64)
        self.master_nodes = (
            self.num_slave_nodes + nym * (nxm + 1) + np.arange(nxm + 1, dtype=np.int64)
        )
        # far faces: slave top, master bottom
        slave_far = nys * (nxs + 1) + np.arange(nxs + 1, dtype=np.int64)
        master_far = self.num_slave_nodes + np.arange(nxm + 1, dtype=np.int64)
        dirichlet_nodes = np.concatenate([slave_far, master_far])
        self.dirichlet_dofs = np.sort(
            np.concatenate([2 * dirichlet_nodes, 2 * dirichlet_nodes + 1])
        )

        n_dofs = 2 * self.num_nodes
        dof_class = np.empty(n_dofs, dtype=np.int8)
        dof_class[: 2 * self.num_slave_nodes] = DOF_INTERIOR_SLAVE
        dof_class[2 * self.num_slave_nodes :] = DOF_INTERIOR_MASTER
        for n in self.slave_nodes:
            dof_class[2 * n : 2 * n + 2] = DOF_SLAVE_INTERFACE
        for n in self.master_nodes:
            dof_class[2 * n : 2 * n + 2] = DOF_MASTER_INTERFACE
        dof_class[self.dirichlet_dofs] = DOF_DIRICHLET
        self.dof_class = dof_class

        # rotate configuration, normals and tangents
        c, s = np.cos(spec.angle), np.sin(spec.angle)
        Q = np.array([[c, -s], [s, c]])
        self.rotation = Q
        self.node_coords = coords @ Q.T
        n_ref, t_ref = np.array([0.0, -1.0]), np.array([1.0, 0.0])
        self.normals = np.tile(Q @ n_ref, (len(self.slave_nodes), 1))
        self.tangents = np.tile(Q @ t_ref, (len(self.slave_nodes), 1))

    @property
    def n_u(self) -> int:
        return 2 * self.num_nodes

    @property
    def n_lam(self) -> int:
        return 2 * len(self.slave_nodes)

    def interface_spacing(self) -> float:
        return self.spec.slave_dims[0] / self.spec.slave_elems[0]


def build_mesh(spec: MeshSpec) -> ContactProblem:
    return ContactProblem(spec)


# -- elasticity -------------------------------------------------------------

_GAUSS = 1.0 / np.sqrt(3.0)
_GAUSS_POINTS = [(-_GAUSS, -_GAUSS), (_GAUSS, -_GAUSS), (_GAUSS, _GAUSS), (-_GAUSS, _GAUSS)]
_CORNERS = np.array([(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)])


def plane_strain_matrix(E: float, nu: float) -> np.ndarray:
    f = E / ((1.0 + nu) * (1.0 - 2.0 * nu))
    return f * np.array(
        [
            [1.0 - nu, nu, 0.0],
            [nu, 1.0 - nu, 0.0],
            [0.0, 0.0, (1.0 - 2.0 * nu) / 2.0],
        ]
    )


def shape_gradients(X: np.ndarray, xi: float, eta: float):
    """Cartesian shape-function gradients and Jacobian determinant at (xi, eta)."""
    dN = np.empty((4, 2))
    for a, (xa, ea) in enumerate(_CORNERS):
        dN[a, 0] = 0.25 * xa * (1.0 + ea * eta)
        dN[a, 1] = 0.25 * ea * (1.0 + xa * xi)
    J = X.T @ dN  # J[i, j] = dx_i / dxi_j
    detJ = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    if detJ <= 0.0:
        raise AssemblyError(f"degenerate element Jacobian (detJ = {detJ})")
    dNdx = dN @ np.linalg.inv(J)
    return dNdx, detJ


def element_stiffness(X: np.ndarray, E: float, nu: float) -> np.ndarray:
    """8x8 bilinear quad stiffness, plane strain, 2x2 Gauss quadrature."""
    C = plane_strain_matrix(E, nu)
    Ke = np.zeros((8, 8))
    for xi, eta in _GAUSS_POINTS:
        dNdx, detJ = shape_gradients(X, xi, eta)
        B = np.zeros((3, 8))
        for a in range(4):
            B[0, 2 * a] = dNdx[a, 0]
            B[1, 2 * a + 1] = dNdx[a, 1]
            B[2, 2 * a] = dNdx[a, 1]
            B[2, 2 * a + 1] = dNdx[a, 0]
        Ke += B.T @ C @ B * detJ
    return Ke


def assemble_elasticity(problem: ContactProblem, spec: MeshSpec, apply_dirichlet: bool = True) -> SparseMatrix:
    """Global stiffness; Dirichlet rows/cols eliminated to the unit diagonal."""
    coords = problem.node_coords
    n_dofs = problem.n_u
    rows, cols, vals = [], [], []
    for quad in problem.elements:
        X = coords[list(quad)]
        Ke = element_stiffness(X, spec.youngs_modulus, spec.poisson_ratio)
        edofs = np.empty(8, dtype=np.int64)
        edofs[0::2] = 2 * np.asarray(quad)
        edofs[1::2] = 2 * np.asarray(quad) + 1
        rows.append(np.repeat(edofs, 8))
        cols.append(np.tile(edofs, 8))
        vals.append(Ke.ravel())
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)

    if apply_dirichlet:
        is_dir = np.zeros(n_dofs, dtype=bool)
        is_dir[problem.dirichlet_dofs] = True
        keep = ~(is_dir[rows] | is_dir[cols])
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
        rows = np.concatenate([rows, problem.dirichlet_dofs])
        cols = np.concatenate([cols, problem.dirichlet_dofs])
        vals = np.concatenate([vals, np.ones(len(problem.dirichlet_dofs))])

    return SparseMatrix.from_coo(rows, cols, vals, (n_dofs, n_dofs))


# -- mortar interface -------------------------------------------------------


def assemble_mortar(problem: ContactProblem, lumped: bool = False):
    """Interface mass matrices D (slave) and M (slave-master) plus weighted gaps.

    With matching interface meshes both reduce to the 1-D boundary mass matrix
    of linear hat functions; `lumped` row-sums D and M to their diagonals.
    Returned matrices are DOF-indexed (node matrix expanded by the 2x2
    identity); the node-indexed versions are kept on the problem for assembly.
    """
    n_s = len(problem.slave_nodes)
    h = problem.interface_spacing()
    Dn = np.zeros((n_s, n_s))
    for e in range(n_s - 1):
        Dn[e : e + 2, e : e + 2] += h * np.array([[1 / 3, 1 / 6], [1 / 6, 1 / 3]])
    if lumped:
        Dn = np.diag(Dn.sum(axis=1))
    Mn = Dn.copy()  # coincident interface meshes

    # nodewise signed overlap along the slave normal (positive = penetration)
    xs = problem.node_coords[problem.slave_nodes]
    xm = problem.node_coords[problem.master_nodes]
    overlap = np.einsum("ij,ij->i", problem.normals, xs - xm)
    weighted_gaps = Dn @ overlap

    problem.D_node = Dn
    problem.M_node = Mn
    D = SparseMatrix.from_dense(np.kron(Dn, np.eye(2)))
    M = SparseMatrix.from_dense(np.kron(Mn, np.eye(2)))
    return D, M, weighted_gaps


# -- saddle-point system ----------------------------------------------------


def constraint_row_slots(normals: np.ndarray):
    """Per-node lambda-row slot of the normal constraint (tangential takes the other).

    The normal row is placed in the slot of the dominant normal component so
    that the Schur block keeps a structurally nonzero diagonal for every frame
    angle; ties resolve to the x slot.
    """
    return np.where(np.abs(normals[:, 0]) >= np.abs(normals[:, 1]), 0, 1).astype(np.int64)


def assemble_saddle(problem: ContactProblem, K: SparseMatrix, D: SparseMatrix, M: SparseMatrix, weighted_gaps: np.ndarray) -> SaddleSystem:
    """Assemble [[K, B1], [B2, -Cz]] and the block right-hand side.

    B1 carries D^T on slave rows and -M^T on master rows; per slave node one
    normal row (in B2) enforces the linearized gap and one tangential row (in
    Cz) enforces frictionless sliding.  Lagrange multipliers stay Cartesian.
    """
    n_u, n_lam = problem.n_u, problem.n_lam
    n_s = len(problem.slave_nodes)
    if D.shape != (n_lam, n_lam) or M.shape != (n_lam, n_lam):
        raise DimensionError("mortar matrix dimensions do not match the interface")
    Dn = D.to_dense()[::2, ::2]
    Mn = M.to_dense()[::2, ::2]

    rows_b1, cols_b1, vals_b1 = [], [], []
    rows_b2, cols_b2, vals_b2 = [], [], []
    rows_cz, cols_cz, vals_cz = [], [], []

    slots = constraint_row_slots(problem.normals)
    row_is_normal = np.zeros(n_lam, dtype=bool)

    for j in range(n_s):
        n_j = problem.normals[j]
        t_j = problem.tangents[j]
        row_n = 2 * j + slots[j]
        row_t = 2 * j + 1 - slots[j]
        row_is_normal[row_n] = True

        for k in range(n_s):
            dkj = Dn[k, j]
            if dkj != 0.0:
                for c in range(2):
                    rows_b1.append(2 * problem.slave_nodes[k] + c)
                    cols_b1.append(2 * j + c)
                    vals_b1.append(dkj)
            mkj = Mn[k, j]
            if mkj != 0.0:
                for c in range(2):
                    rows_b1.append(2 * problem.master_nodes[k] + c)
                    cols_b1.append(2 * j + c)
                    vals_b1.append(-mkj)

            djk = Dn[j, k]
            if djk != 0.0:
                for c in range(2):
                    rows_b2.append(row_n)
                    cols_b2.append(2 * problem.slave_nodes[k] + c)
                    vals_b2.append(n_j[c] * djk)
            mjk = Mn[j, k]
            if mjk != 0.0:
                for c in range(2):
                    rows_b2.append(row_n)
                    cols_b2.append(2 * problem.master_nodes[k] + c)
                    vals_b2.append(-n_j[c] * mjk)

        for c in range(2):
            rows_cz.append(row_t)
            cols_cz.append(2 * j + c)
            vals_cz.append(t_j[c])

    B1 = SparseMatrix.from_coo(rows_b1, cols_b1, vals_b1, (n_u, n_lam))
    B2 = SparseMatrix.from_coo(rows_b2, cols_b2, vals_b2, (n_lam, n_u))
    Cz = SparseMatrix.from_coo(rows_cz, cols_cz, vals_cz, (n_lam, n_lam))

    rhs_lam = np.zeros(n_lam)
    for j in range(n_s):
        rhs_lam[2 * j + slots[j]] = -weighted_gaps[j]
    rhs = BlockVector(np.zeros(n_u), rhs_lam)

    op = SaddleOperator(K, B1, B2, Cz)
    return SaddleSystem(op, rhs, row_is_normal=row_is_normal)


def build_system(spec: MeshSpec, lumped_mortar: bool = False):
    """Convenience driver: mesh -> K -> mortar -> saddle system."""
    problem = build_mesh(spec)
    K = assemble_elasticity(problem, spec)
    D, M, gaps = assemble_mortar(problem, lumped=lumped_mortar)
    problem.D, problem.M, problem.weighted_gaps = D, M, gaps
    system = assemble_saddle(problem, K, D, M, gaps)
    return problem, system
