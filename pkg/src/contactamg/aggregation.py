"""Node aggregation: interface-respecting displacement aggregates and the
mortar-driven Lagrange-multiplier aggregation.

Displacement aggregation runs a deterministic three-phase greedy sweep on the
node graph of the stiffness block with all cross-body connections dropped on
the fly, so no aggregate ever spans the contact interface.  Lagrange
multiplier aggregates are then derived directly from the displacement
aggregates by walking the rows of the slave mortar matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, SetupError
from .sparse import SparseMatrix

UNASSIGNED = -1

BODY_SLAVE = 0
BODY_MASTER = 1


class NodeGraph:
    """Undirected node graph with per-node body and interface tags."""

    def __init__(self, num_nodes, indptr, indices, body_tag, interface_tag=None):
        self.num_nodes = int(num_nodes)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.body_tag = np.asarray(body_tag, dtype=np.int8)
        self.interface_tag = (
            np.zeros(num_nodes, dtype=np.int8)
            if interface_tag is None
            else np.asarray(interface_tag, dtype=np.int8)
        )

    def neighbors(self, i) -> np.ndarray:
        return self.indices[self.indptr[i] : self.indptr[i + 1]]

    @property
    def adjacency(self):
        return [self.neighbors(i) for i in range(self.num_nodes)]

    @staticmethod
    def from_edges(num_nodes, edges, body_tag=None, interface_tag=None) -> "NodeGraph":
        body = np.zeros(num_nodes, dtype=np.int8) if body_tag is None else body_tag
        if len(edges):
            e = np.asarray(edges, dtype=np.int64)
            both = np.vstack([e, e[:, ::-1]])
            both = np.unique(both, axis=0)
            both = both[both[:, 0] != both[:, 1]]
            order = np.lexsort((both[:, 1], both[:, 0]))
            both = both[order]
            counts = np.bincount(both[:, 0], minlength=num_nodes)
            indptr = np.concatenate([[0], np.cumsum(counts)])
            indices = both[:, 1]
        else:
            indptr = np.zeros(num_nodes + 1, dtype=np.int64)
            indices = np.zeros(0, dtype=np.int64)
        return NodeGraph(num_nodes, indptr, indices, body, interface_tag)


@dataclass
class Aggregation:
    """Partition of nodes into aggregates."""

    node_to_agg: np.ndarray
    num_aggs: int
    agg_root: np.ndarray
    singleton_count: int = 0
    overlap_touch_count: int = 0

    def sizes(self) -> np.ndarray:
        return np.bincount(self.node_to_agg, minlength=self.num_aggs)

    def is_partition(self) -> bool:
        if np.any(self.node_to_agg == UNASSIGNED):
            return False
        return bool(np.all(self.sizes() > 0))


@dataclass
class LagrangeMap:
    """Index bookkeeping feeding the Lagrange-multiplier aggregation.

    `slave_dofs[r]` is the displacement DOF behind row r of the mortar block,
    `row_node[r]` the displacement node owning it, and `lm_node_of_lm_dof[c]`
    the pseudo-node of multiplier DOF c.
    """

    slave_dofs: np.ndarray
    row_node: np.ndarray
    lm_node_of_lm_dof: np.ndarray

    @property
    def num_lm_nodes(self) -> int:
        return int(self.lm_node_of_lm_dof.max()) + 1 if len(self.lm_node_of_lm_dof) else 0

    def slave_dof_to_lm_dof(self, dof) -> int:
        idx = np.searchsorted(self.slave_dofs, dof)
        if idx >= len(self.slave_dofs) or self.slave_dofs[idx] != dof:
            raise KeyError(f"DOF {dof} is not a slave interface DOF")
        return int(idx)


def build_filtered_graph(K: SparseMatrix, dofs_per_node: int, dof_class=None, node_body=None, eps_drop: float = 0.0) -> NodeGraph:
    """Node graph of K with cross-body connections dropped on the fly.

    Two nodes are adjacent when any DOF pair between them exceeds the drop
    tolerance relative to sqrt(|K_ii K_jj|) and both nodes belong to the same
    body.  The filtered matrix itself is never formed.
    """
    if K.num_rows % dofs_per_node != 0:
        raise DimensionError("K rows are not divisible by dofs_per_node")
    n_dofs = K.num_rows
    dof_node = np.arange(n_dofs, dtype=np.int64) // dofs_per_node
    num_nodes = n_dofs // dofs_per_node
    if node_body is None:
        node_body = _node_body_from_dof_class(dof_class, dof_node, num_nodes)
    interface_tag = _interface_tag_from_dof_class(dof_class, dof_node, num_nodes)
    return filtered_node_graph(K, dof_node, num_nodes, node_body, interface_tag, eps_drop)


def filtered_node_graph(K: SparseMatrix, dof_node, num_nodes, node_body, interface_tag=None, eps_drop: float = 0.0) -> NodeGraph:
    """General form of build_filtered_graph for an arbitrary DOF->node map."""
    dof_node = np.asarray(dof_node, dtype=np.int64)
    if len(dof_node) != K.num_rows:
        raise DimensionError("dof->node map length does not match K")
    node_body = np.asarray(node_body, dtype=np.int8)

    rows = np.repeat(np.arange(K.num_rows, dtype=np.int64), np.diff(K.row_offsets))
    cols = K.col_indices
    vals = np.abs(K.values)
    ni, nj = dof_node[rows], dof_node[cols]
    mask = (ni != nj) & (node_body[ni] == node_body[nj])
    if eps_drop > 0.0:
        diag = np.abs(K.to_scipy().diagonal())
        mask &= vals > eps_drop * np.sqrt(diag[rows] * diag[cols])
    else:
        mask &= vals > 0.0
    edges = np.column_stack([ni[mask], nj[mask]])
    return NodeGraph.from_edges(num_nodes, edges, body_tag=node_body, interface_tag=interface_tag)


def _node_body_from_dof_class(dof_class, dof_node, num_nodes):
    from .problem import (
        DOF_INTERIOR_MASTER,
        DOF_INTERIOR_SLAVE,
        DOF_MASTER_INTERFACE,
        DOF_SLAVE_INTERFACE,
    )

    if dof_class is None:
        return np.zeros(num_nodes, dtype=np.int8)
    dof_class = np.asarray(dof_class)
    if len(dof_class) != len(dof_node):
        raise DimensionError("dof_class length does not match K")
    body = np.full(num_nodes, -1, dtype=np.int8)
    slave_like = (dof_class == DOF_INTERIOR_SLAVE) | (dof_class == DOF_SLAVE_INTERFACE)
    master_like = (dof_class == DOF_INTERIOR_MASTER) | (dof_class == DOF_MASTER_INTERFACE)
    body[dof_node[slave_like]] = BODY_SLAVE
    body[dof_node[master_like]] = BODY_MASTER
    if np.any(body == -1):
        raise SetupError(
            "node body cannot be derived from dof_class alone (fully Dirichlet "
            "node); pass node_body explicitly"
        )
    return body


def _interface_tag_from_dof_class(dof_class, dof_node, num_nodes):
    from .problem import DOF_MASTER_INTERFACE, DOF_SLAVE_INTERFACE

    tag = np.zeros(num_nodes, dtype=np.int8)
    if dof_class is None:
        return tag
    dof_class = np.asarray(dof_class)
    tag[dof_node[dof_class == DOF_SLAVE_INTERFACE]] = 1
    tag[dof_node[dof_class == DOF_MASTER_INTERFACE]] = 2
    return tag


def aggregate_greedy(graph: NodeGraph, min_agg_size: int = 1) -> Aggregation:
    """Three-phase greedy aggregation with lowest-id tie breaking.

    Phase 1 roots nodes whose neighborhood is untouched and absorbs it,
    phase 2 attaches leftovers to the adjacent aggregate with most adjacent
    members, phase 3 merges undersized aggregates into their most-connected
    neighbor aggregate.  Isolated nodes stay as flagged singletons.
    """
    if min_agg_size < 1:
        raise ValueError("min_agg_size must be >= 1")
    n = graph.num_nodes
    agg = np.full(n, UNASSIGNED, dtype=np.int64)
    roots = []

    for i in range(n):
        if agg[i] != UNASSIGNED:
            continue
        nbrs = graph.neighbors(i)
        if np.all(agg[nbrs] == UNASSIGNED):
            a = len(roots)
            agg[i] = a
            agg[nbrs] = a
            roots.append(i)

    for i in range(n):
        if agg[i] != UNASSIGNED:
            continue
        nbrs = graph.neighbors(i)
        cand = agg[nbrs]
        cand = cand[cand != UNASSIGNED]
        if len(cand) == 0:
            a = len(roots)
            agg[i] = a
            roots.append(i)
            continue
        counts = np.bincount(cand)
        agg[i] = int(np.argmax(counts))  # argmax takes the lowest id on ties

    num_aggs = len(roots)
    sizes = np.bincount(agg, minlength=num_aggs)
    alive = np.ones(num_aggs, dtype=bool)

    if min_agg_size > 1:
        members = [list(np.where(agg == a)[0]) for a in range(num_aggs)]
        for a in range(num_aggs):
            if not alive[a] or sizes[a] >= min_agg_size:
                continue
            conn = {}
            for node in members[a]:
                for nbr in graph.neighbors(node):
                    b = agg[nbr]
                    if b != a:
                        conn[b] = conn.get(b, 0) + 1
            if not conn:
                continue  # isolated: stays undersized, flagged as singleton below
            best = max(sorted(conn), key=lambda b: (conn[b], -b))
            agg[members[a]] = best
            members[best].extend(members[a])
            sizes[best] += sizes[a]
            sizes[a] = 0
            members[a] = []
            alive[a] = False

    # compact surviving aggregate ids, ascending by original id
    old_ids = np.where(np.bincount(agg, minlength=num_aggs) > 0)[0]
    remap = np.full(num_aggs, UNASSIGNED, dtype=np.int64)
    remap[old_ids] = np.arange(len(old_ids))
    agg = remap[agg]
    agg_root = np.array([roots[a] for a in old_ids], dtype=np.int64)

    result = Aggregation(agg, len(old_ids), agg_root)
    result.singleton_count = int(np.sum(result.sizes() == 1))
    return result


def aggregate_lagrange(disp_aggs: Aggregation, D: SparseMatrix, lmap: LagrangeMap) -> Aggregation:
    """Lagrange-multiplier aggregation driven by the displacement aggregates.

    Walks the rows of the mortar block in ascending slave-DOF order; every
    multiplier pseudo-node referenced by a nonzero entry joins the multiplier
    aggregate associated with the row's displacement aggregate, creating that
    aggregate on first touch.  A pseudo-node already claimed by a different
    aggregate stays where it is (first touch wins); such collisions are
    counted in `overlap_touch_count`.
    """
    n_lm_nodes = lmap.num_lm_nodes
    lam_agg = np.full(n_lm_nodes, UNASSIGNED, dtype=np.int64)
    disp_to_lam = {}
    roots = []
    overlap = 0

    order = np.argsort(lmap.slave_dofs, kind="stable")
    for r in order:
        node = int(lmap.row_node[r])
        k = int(disp_aggs.node_to_agg[node])
        if k == UNASSIGNED:
            raise SetupError(f"slave DOF {lmap.slave_dofs[r]}: node {node} is unaggregated")
        start, end = D.row_offsets[r], D.row_offsets[r + 1]
        for idx in range(start, end):
            if D.values[idx] == 0.0:
                continue
            pn = int(lmap.lm_node_of_lm_dof[D.col_indices[idx]])
            target = disp_to_lam.get(k)
            if lam_agg[pn] == UNASSIGNED:
                if target is None:
                    target = len(roots)
                    disp_to_lam[k] = target
                    roots.append(pn)
                lam_agg[pn] = target
            elif target is None or lam_agg[pn] != target:
                overlap += 1

    return Aggregation(
        lam_agg,
        len(roots),
        np.asarray(roots, dtype=np.int64),
        overlap_touch_count=overlap,
    )


def check_body_separation(aggs: Aggregation, body_tag) -> bool:
    body_tag = np.asarray(body_tag)
    for a in range(aggs.num_aggs):
        bodies = np.unique(body_tag[aggs.node_to_agg == a])
        if len(bodies) > 1:
            return False
    return True


def dump_aggregation(aggs: Aggregation, body_tag) -> str:
    """Text dump: one line per node `node_id aggregate_id body_tag`."""
    body_tag = np.asarray(body_tag)
    lines = [
        f"{i} {aggs.node_to_agg[i]} {body_tag[i]}"
        for i in range(len(aggs.node_to_agg))
    ]
    return "\n".join(lines) + "\n"
