"""Fully coupled aggregation-based AMG for mortar-contact saddle-point systems.

The package builds the two-body contact test problem, the interface-aware
multigrid hierarchy with segregated transfers, Schur-complement block
smoothers, and a right-preconditioned GMRES solver around them.
"""

from .sparse import BlockVector, SparseMatrix

__all__ = ["SparseMatrix", "BlockVector"]
__version__ = "0.1.0"
