"""P1 assembly of the bulk/boundary mass and stiffness operators.

The discrete H^0 inner product is ``v' (M_bulk + M_bdry) w`` and the energy
form is ``u' (K_bulk + K_bdry) w``, where ``K_bdry`` is the arclength
(Laplace-Beltrami) stiffness along the Gamma1 polylines.  Dirichlet nodes on
Gamma0 are eliminated; every returned matrix lives on the free dofs.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .mesh import GAMMA1, InvalidParameterError, Mesh


class DegenerateSystemError(ValueError):
    pass


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class DiscreteOperators:
    """Sparse operators restricted to free dofs.

    ``free_nodes[i]`` is the mesh node of system index ``i``.  The lumped
    weights are the row sums of the *full* (pre-elimination) mass matrices
    taken at the free nodes.
    """

    mesh: Mesh
    mass_bulk: sp.csr_matrix
    mass_boundary: sp.csr_matrix
    stiff_bulk: sp.csr_matrix
    stiff_boundary: sp.csr_matrix
    free_nodes: np.ndarray
    boundary_dofs: np.ndarray
    lumped_bulk: np.ndarray
    lumped_boundary: np.ndarray

    @property
    def n(self) -> int:
        return len(self.free_nodes)

    @cached_property
    def M(self) -> sp.csr_matrix:
        return (self.mass_bulk + self.mass_boundary).tocsr()

    @cached_property
    def K(self) -> sp.csr_matrix:
        return (self.stiff_bulk + self.stiff_boundary).tocsr()

    @cached_property
    def H1(self) -> sp.csr_matrix:
        """Gram matrix of the discrete H^1 scalar product."""
        return (self.K + self.mass_boundary).tocsr()

    def restrict(self, nodal: np.ndarray) -> np.ndarray:
        """Nodal values over the whole mesh -> free-dof vector."""
        return np.asarray(nodal, dtype=float)[self.free_nodes]

    def extend(self, vec: np.ndarray) -> np.ndarray:
        """Free-dof vector -> nodal values, zero on Dirichlet nodes."""
        out = np.zeros(self.mesh.n_nodes)
        out[self.free_nodes] = vec
        return out

    def check(self, vec: np.ndarray, name: str = "vector") -> np.ndarray:
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.n,):
            raise ShapeError(f"{name} has shape {vec.shape}, expected ({self.n},)")
        return vec


def _symmetrize(A: sp.spmatrix) -> sp.csr_matrix:
    # (a + b) * 0.5 is commutative in floating point, so the result is exactly symmetric.
    A = A.tocsr()
    S = ((A + A.T) * 0.5).tocsr()
    S.sum_duplicates()
    S.sort_indices()
    return S


def _coo(n, rows, cols, vals) -> sp.csr_matrix:
    return _symmetrize(sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)))


def _bulk_matrices(mesh: Mesh):
    n = mesh.n_nodes
    E = mesh.elements
    X = mesh.nodes[E]
    k = E.shape[1]
    rows = np.repeat(E, k, axis=1)
    cols = np.tile(E, (1, k))
    if mesh.dim == 1:
        h = X[:, 1, 0] - X[:, 0, 0]
        Ke = np.array([[1.0, -1.0], [-1.0, 1.0]])[None] / h[:, None, None]
        Me = np.array([[2.0, 1.0], [1.0, 2.0]])[None] * (h / 6.0)[:, None, None]
    else:
        d1 = X[:, 1] - X[:, 0]
        d2 = X[:, 2] - X[:, 0]
        area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        # Gradients of barycentric coordinates: rotated opposite edges / (2 area).
        e0 = X[:, 2] - X[:, 1]
        e1 = X[:, 0] - X[:, 2]
        e2 = X[:, 1] - X[:, 0]
        G = np.stack([np.column_stack([-e[:, 1], e[:, 0]]) for e in (e0, e1, e2)], axis=1)
        G = G / (2.0 * area)[:, None, None]
        Ke = np.einsum("eid,ejd->eij", G, G) * area[:, None, None]
        Me = (np.ones((3, 3)) + np.eye(3))[None] * (area / 12.0)[:, None, None]
    return _coo(n, rows, cols, Me), _coo(n, rows, cols, Ke)


def _boundary_matrices(mesh: Mesh):
    n = mesh.n_nodes
    F = mesh.boundary_facets[mesh.boundary_tags == GAMMA1]
    if mesh.dim == 1:
        # Point boundary: counting measure, no tangential derivative.
        idx = F[:, 0]
        Mb = _coo(n, idx, idx, np.ones(len(idx)))
        return Mb, sp.csr_matrix((n, n))
    if len(F) == 0:
        return sp.csr_matrix((n, n)), sp.csr_matrix((n, n))
    h = np.linalg.norm(mesh.nodes[F[:, 1]] - mesh.nodes[F[:, 0]], axis=1)
    rows = np.repeat(F, 2, axis=1)
    cols = np.tile(F, (1, 2))
    Me = np.array([[2.0, 1.0], [1.0, 2.0]])[None] * (h / 6.0)[:, None, None]
    Ke = np.array([[1.0, -1.0], [-1.0, 1.0]])[None] / h[:, None, None]
    return _coo(n, rows, cols, Me), _coo(n, rows, cols, Ke)


def assemble_full(mesh: Mesh) -> dict:
    """All four operators on every mesh node, before Dirichlet elimination."""
    Mb, Kb = _bulk_matrices(mesh)
    Mg, Kg = _boundary_matrices(mesh)
    return {"mass_bulk": Mb, "mass_boundary": Mg, "stiff_bulk": Kb, "stiff_boundary": Kg}


def assemble(mesh: Mesh) -> DiscreteOperators:
    full = assemble_full(mesh)
    free = mesh.free_nodes
    if len(free) == 0:
        raise DegenerateSystemError("no free dofs: every node is pinched")

    def restrict(A):
        R = A[free][:, free].tocsr()
        R.sort_indices()
        return R

    lumped_b = np.asarray(full["mass_bulk"].sum(axis=1)).ravel()[free]
    lumped_g = np.asarray(full["mass_boundary"].sum(axis=1)).ravel()[free]
    g1 = np.isin(free, mesh.gamma1_nodes)
    return DiscreteOperators(
        mesh=mesh,
        mass_bulk=restrict(full["mass_bulk"]),
        mass_boundary=restrict(full["mass_boundary"]),
        stiff_bulk=restrict(full["stiff_bulk"]),
        stiff_boundary=restrict(full["stiff_boundary"]),
        free_nodes=free,
        boundary_dofs=np.flatnonzero(g1),
        lumped_bulk=lumped_b,
        lumped_boundary=lumped_g,
    )


def h1_norm(ops: DiscreteOperators, u) -> float:
    """sqrt(u'Ku + u'M_bdry u): gradient terms plus the L2(Gamma1) trace term."""
    u = ops.check(u, "u")
    val = u @ (ops.H1 @ u)
    return float(np.sqrt(max(val, 0.0)))


def h0_norm(ops: DiscreteOperators, v) -> float:
    v = ops.check(v, "v")
    return float(np.sqrt(max(v @ (ops.M @ v), 0.0)))


def weighted_lp_norm(ops: DiscreteOperators, u, rho: float, field=None, region: str = "bulk") -> float:
    """Lumped discrete ``(sum_i w_i field_i |u_i|^rho)^(1/rho)``.

    ``region`` selects the bulk or Gamma1 quadrature weights; ``field`` is a
    per-free-dof array or scalar (default 1).
    """
    if rho < 1:
        raise InvalidParameterError(f"exponent must be >= 1, got {rho}")
    u = ops.check(u, "u")
    w = ops.lumped_bulk if region == "bulk" else ops.lumped_boundary
    f = 1.0 if field is None else np.asarray(field, dtype=float)
    if np.any(f < 0):
        raise InvalidParameterError("coefficient field must be nonnegative")
    with np.errstate(over="ignore"):
        s = float(np.sum(w * f * np.abs(u) ** rho))
    return s ** (1.0 / rho)


def write_triplets(A: sp.spmatrix, path) -> None:
    """Coordinate triplet CSV ``row,col,value`` in row-major order."""
    C = sp.csr_matrix(A)
    C.sort_indices()
    C = C.tocoo()
    lines = ["row,col,value"] + [f"{i},{j},{v!r}" for i, j, v in zip(C.row, C.col, C.data.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")
