"""Structured meshes with a pinched part Gamma0 and a dynamic part Gamma1.

Three canonical geometries are generated: an interval (rod with a tip mass),
an annulus (drumhead with a hole, thick outer border) and a rectangle with one
dynamic side.  A plain CSV exchange format allows external meshes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

GAMMA0 = 0
GAMMA1 = 1

_SIDES = ("top", "bottom", "left", "right")


class InvalidParameterError(ValueError):
    """Raised for out-of-range generator or numerical parameters."""


class MeshFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Mesh:
    """P1 simplicial mesh with a tagged boundary.

    Attributes
    ----------
    dim : int
        1 (intervals) or 2 (triangles).
    nodes : ndarray, shape (n_nodes, dim)
    elements : ndarray of int, shape (n_elem, dim + 1)
    boundary_facets : ndarray of int, shape (n_bfacets, dim)
        A boundary node (1D) or boundary edge (2D).
    boundary_tags : ndarray of int, shape (n_bfacets,)
        GAMMA0 or GAMMA1 for each facet.
    chains : tuple of (ndarray, bool)
        Ordered node sequences of the connected Gamma1 components and a
        closed flag.
    """

    dim: int
    nodes: np.ndarray
    elements: np.ndarray
    boundary_facets: np.ndarray
    boundary_tags: np.ndarray
    chains: tuple = field(default=())

    def __post_init__(self):
        for name in ("nodes", "elements", "boundary_facets", "boundary_tags"):
            getattr(self, name).setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def dirichlet_nodes(self) -> np.ndarray:
        # Any node touching a Gamma0 facet, corners on both tags included.
        return np.unique(self.boundary_facets[self.boundary_tags == GAMMA0])

    @property
    def gamma1_nodes(self) -> np.ndarray:
        g1 = np.unique(self.boundary_facets[self.boundary_tags == GAMMA1])
        return np.setdiff1d(g1, self.dirichlet_nodes)

    @property
    def free_nodes(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.n_nodes), self.dirichlet_nodes)

    def element_measures(self) -> np.ndarray:
        x = self.nodes[self.elements]
        if self.dim == 1:
            return x[:, 1, 0] - x[:, 0, 0]
        d1 = x[:, 1] - x[:, 0]
        d2 = x[:, 2] - x[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def measure(self) -> float:
        return float(self.element_measures().sum())

    def gamma1_measure(self) -> float:
        if self.dim == 1:
            return float(np.count_nonzero(self.boundary_tags == GAMMA1))
        e = self.boundary_facets[self.boundary_tags == GAMMA1]
        return float(np.linalg.norm(self.nodes[e[:, 1]] - self.nodes[e[:, 0]], axis=1).sum())

    def without_gamma1(self) -> "Mesh":
        """Same mesh with every boundary facet pinched (Gamma1 empty)."""
        return Mesh(
            self.dim,
            self.nodes.copy(),
            self.elements.copy(),
            self.boundary_facets.copy(),
            np.full_like(self.boundary_tags, GAMMA0),
            (),
        )


def facet_incidence(mesh: Mesh) -> dict:
    """Map each facet (sorted node tuple) to the number of elements sharing it."""
    counts: dict = {}
    if mesh.dim == 1:
        for a, b in mesh.elements:
            for f in ((a,), (b,)):
                counts[f] = counts.get(f, 0) + 1
        return counts
    for a, b, c in mesh.elements:
        for f in ((a, b), (b, c), (c, a)):
            key = tuple(sorted(f))
            counts[key] = counts.get(key, 0) + 1
    return counts


def generate_interval(L: float, n: int) -> Mesh:
    """Rod of length ``L`` pinched at x=0 with a dynamic tip at x=L."""
    if not L > 0 or n < 2:
        raise InvalidParameterError(f"interval needs L > 0 and n >= 2, got L={L}, n={n}")
    nodes = np.linspace(0.0, L, n + 1)[:, None]
    elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    facets = np.array([[0], [n]])
    tags = np.array([GAMMA0, GAMMA1])
    return Mesh(1, nodes, elements, facets, tags, ((np.array([n]), False),))


def generate_annulus(r0: float, r1: float, nr: int, nt: int) -> Mesh:
    """Annulus r0 < |x| < r1; inner circle pinched, outer circle dynamic.

    The boundary is the inscribed polygon.  Ring ``i`` (radius increasing)
    holds nodes ``i*nt .. i*nt + nt - 1``.
    """
    if not (0 < r0 < r1):
        raise InvalidParameterError(f"annulus needs 0 < r0 < r1, got r0={r0}, r1={r1}")
    if nr < 2:
        raise InvalidParameterError(f"annulus needs nr >= 2, got {nr}")
    if nt < 8:
        raise InvalidParameterError(f"annulus needs nt >= 8, got {nt}")
    radii = np.linspace(r0, r1, nr + 1)
    theta = 2 * np.pi * np.arange(nt) / nt
    rr, tt = np.meshgrid(radii, theta, indexing="ij")
    nodes = np.column_stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()])

    i, j = np.meshgrid(np.arange(nr), np.arange(nt), indexing="ij")
    i, j = i.ravel(), j.ravel()
    jn = (j + 1) % nt
    a = i * nt + j
    b = i * nt + jn
    c = (i + 1) * nt + jn
    d = (i + 1) * nt + j
    # (r, theta) -> (x, y) preserves orientation, so order counterclockwise in (r, theta).
    tris = np.empty((2 * nr * nt, 3), dtype=np.int64)
    tris[0::2] = np.column_stack([a, c, b])
    tris[1::2] = np.column_stack([a, d, c])

    k = np.arange(nt)
    inner = np.column_stack([k, (k + 1) % nt])
    outer_nodes = nr * nt + k
    outer = np.column_stack([outer_nodes, nr * nt + (k + 1) % nt])
    facets = np.vstack([inner, outer])
    tags = np.concatenate([np.full(nt, GAMMA0), np.full(nt, GAMMA1)])
    return Mesh(2, nodes, tris, facets, tags, ((outer_nodes, True),))


def generate_rectangle(Lx: float, Ly: float, nx: int, ny: int, gamma1_side: str = "top") -> Mesh:
    """Rectangle [0, Lx] x [0, Ly] with one dynamic side and three pinched ones."""
    if gamma1_side not in _SIDES:
        raise InvalidParameterError(f"gamma1_side must be one of {_SIDES}, got {gamma1_side!r}")
    if not (Lx > 0 and Ly > 0):
        raise InvalidParameterError("rectangle side lengths must be positive")
    if nx < 2 or ny < 2:
        raise InvalidParameterError(f"rectangle needs nx, ny >= 2, got nx={nx}, ny={ny}")
    xs = np.linspace(0.0, Lx, nx + 1)
    ys = np.linspace(0.0, Ly, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def idx(i, j):
        return i * (ny + 1) + j

    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    i, j = i.ravel(), j.ravel()
    a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
    tris = np.empty((2 * nx * ny, 3), dtype=np.int64)
    tris[0::2] = np.column_stack([a, b, c])
    tris[1::2] = np.column_stack([a, c, d])

    sides = {
        "bottom": idx(np.arange(nx + 1), 0),
        "right": idx(nx, np.arange(ny + 1)),
        "top": idx(np.arange(nx + 1), ny),
        "left": idx(0, np.arange(ny + 1)),
    }
    facets, tags = [], []
    for name, seq in sides.items():
        facets.append(np.column_stack([seq[:-1], seq[1:]]))
        tags.append(np.full(len(seq) - 1, GAMMA1 if name == gamma1_side else GAMMA0))
    chain = sides[gamma1_side]
    return Mesh(2, nodes, tris, np.vstack(facets), np.concatenate(tags), ((chain, False),))


def _chains_from_facets(dim: int, facets: np.ndarray, tags: np.ndarray) -> tuple:
    g1 = facets[tags == GAMMA1]
    if len(g1) == 0:
        return ()
    if dim == 1:
        return tuple((np.array([n]), False) for n in g1[:, 0])
    adj: dict = {}
    for a, b in g1:
        adj.setdefault(int(a), []).append(int(b))
        adj.setdefault(int(b), []).append(int(a))
    seen: set = set()
    chains = []
    ends = sorted(n for n, nb in adj.items() if len(nb) == 1)
    starts = ends + sorted(adj)
    for s in starts:
        if s in seen:
            continue
        seq, prev, cur = [s], None, s
        seen.add(s)
        while True:
            nxt = [m for m in adj[cur] if m != prev and m not in seen]
            if not nxt:
                break
            prev, cur = cur, nxt[0]
            seq.append(cur)
            seen.add(cur)
        closed = len(seq) > 2 and seq[0] in adj[seq[-1]] and len(adj[s]) == 2
        chains.append((np.array(seq), closed))
    return tuple(chains)


def write_mesh_csv(mesh: Mesh, path) -> None:
    lines = [f"# dynbc-mesh v1 dim={mesh.dim}"]
    for i, x in enumerate(mesh.nodes):
        lines.append(",".join(["node", str(i)] + [repr(float(c)) for c in x]))
    for i, e in enumerate(mesh.elements):
        lines.append(",".join(["elem", str(i)] + [str(int(n)) for n in e]))
    for i, (f, t) in enumerate(zip(mesh.boundary_facets, mesh.boundary_tags)):
        lines.append(",".join(["bface", str(i)] + [str(int(n)) for n in f] + [str(int(t))]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh_csv(path) -> Mesh:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("# dynbc-mesh v1 dim="):
        raise MeshFormatError(f"{path}: missing '# dynbc-mesh v1 dim=<d>' header")
    try:
        dim = int(text[0].split("dim=")[1])
    except ValueError as exc:
        raise MeshFormatError(f"{path}: bad dimension in header") from exc
    if dim not in (1, 2):
        raise MeshFormatError(f"{path}: dim must be 1 or 2")
    nodes, elems, facets, tags = {}, {}, {}, {}
    for lineno, line in enumerate(text[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        kind = parts[0]
        try:
            if kind == "node" and len(parts) == 2 + dim:
                nodes[int(parts[1])] = [float(v) for v in parts[2:]]
            elif kind == "elem" and len(parts) == 3 + dim:
                elems[int(parts[1])] = [int(v) for v in parts[2:]]
            elif kind == "bface" and len(parts) == 3 + dim:
                facets[int(parts[1])] = [int(v) for v in parts[2:-1]]
                tags[int(parts[1])] = int(parts[-1])
            else:
                raise MeshFormatError(f"{path}:{lineno}: malformed record {line!r}")
        except ValueError as exc:
            if isinstance(exc, MeshFormatError):
                raise
            raise MeshFormatError(f"{path}:{lineno}: malformed number in {line!r}") from exc
    for name, d in (("node", nodes), ("elem", elems), ("bface", facets)):
        if sorted(d) != list(range(len(d))):
            raise MeshFormatError(f"{path}: {name} ids must be 0..n-1")
    if any(t not in (GAMMA0, GAMMA1) for t in tags.values()):
        raise MeshFormatError(f"{path}: boundary tag must be 0 or 1")
    n = len(nodes)
    X = np.array([nodes[i] for i in range(n)], dtype=float).reshape(n, dim)
    E = np.array([elems[i] for i in range(len(elems))], dtype=np.int64).reshape(-1, dim + 1)
    F = np.array([facets[i] for i in range(len(facets))], dtype=np.int64).reshape(-1, dim)
    T = np.array([tags[i] for i in range(len(tags))], dtype=np.int64)
    if E.size and (E.min() < 0 or E.max() >= n):
        raise MeshFormatError(f"{path}: element references unknown node")
    mesh = Mesh(dim, X, E, F, T, _chains_from_facets(dim, F, T))
    if E.size and not np.all(mesh.element_measures() > 0):
        raise MeshFormatError(f"{path}: elements must have positive orientation and measure")
    return mesh
