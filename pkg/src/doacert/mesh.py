"""Interpolation meshes: node sets plus cells whose union covers the region.

The error bound downstream needs two things from a mesh: the nodes must be
unisolvent for the requested polynomial degree (square, invertible Vandermonde
system), and every point of the region must lie in some cell whose vertices
are nodes, with cell diameter at most the recorded spacing.

In one dimension this is just consecutive intervals over equispaced (or
Chebyshev) nodes.  In higher dimensions we pick approximate Fekete nodes by
QR with column pivoting over a candidate grid, always keeping the box corners
so the Delaunay cells of the node set tile the whole box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .functions import Box
from .poly import monomial_basis


@dataclass(frozen=True)
class Mesh:
    nodes: tuple[tuple[float, ...], ...]
    spacing: float  # max cell diameter
    cells: tuple[tuple[int, ...], ...]  # vertex indices into ``nodes``
    kind: str  # "rectangular" or "simplicial"

    @property
    def dim(self) -> int:
        return len(self.nodes[0])

    def __len__(self) -> int:
        return len(self.nodes)

    def node_array(self) -> np.ndarray:
        return np.array(self.nodes, dtype=float)


def _chebyshev_nodes(lo: float, hi: float, k: int) -> list[float]:
    # Chebyshev-Lobatto points, endpoints included so cells still cover [lo, hi].
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    return [mid - half * math.cos(math.pi * i / (k - 1)) for i in range(k)][::-1]


def build_mesh(domain: Box, points: int, kind: str = "auto",
               node_rule: str = "equispaced") -> Mesh:
    """Build a mesh with ``points`` nodes on ``domain``.

    1D meshes are interval chains.  In n >= 2 dimensions, ``points`` must equal
    C(n + d, n) for some degree d; nodes are chosen unisolvent for that degree
    and cells come from a Delaunay triangulation.
    """
    if points < 2:
        raise ValueError("a mesh needs at least two nodes")
    n = domain.dim
    if n == 1:
        lo, hi = domain.interval(0)
        if node_rule == "chebyshev":
            xs = _chebyshev_nodes(lo, hi, points)
        else:
            xs = [lo + (hi - lo) * i / (points - 1) for i in range(points)]
        nodes = tuple((x,) for x in xs)
        cells = tuple((i, i + 1) for i in range(points - 1))
        spacing = max(xs[i + 1] - xs[i] for i in range(points - 1))
        return Mesh(nodes, spacing, cells, "rectangular")

    degree = _degree_for_count(n, points)
    if kind == "rectangular":
        return _tensor_mesh(domain, points)
    return _simplicial_mesh(domain, degree, points)


def _degree_for_count(n: int, points: int) -> int:
    d = 0
    while math.comb(n + d, n) < points:
        d += 1
    if math.comb(n + d, n) != points:
        raise ValueError(
            f"{points} nodes is not a full basis size C({n}+d, {n}) for any degree d"
        )
    return d


def _tensor_mesh(domain: Box, points: int) -> Mesh:
    n = domain.dim
    per_axis = round(points ** (1.0 / n))
    if per_axis**n != points:
        raise ValueError(f"rectangular mesh needs a perfect {n}-th power of nodes")
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(domain.lower, domain.upper)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    nodes = tuple(tuple(float(v) for v in row) for row in grid)

    def flat(idx):
        out = 0
        for i in idx:
            out = out * per_axis + i
        return out

    cells = []
    for base in np.ndindex(*([per_axis - 1] * n)):
        corner_idx = []
        for offs in np.ndindex(*([2] * n)):
            corner_idx.append(flat(tuple(b + o for b, o in zip(base, offs))))
        cells.append(tuple(corner_idx))
    diam = math.sqrt(
        sum(((hi - lo) / (per_axis - 1)) ** 2 for lo, hi in zip(domain.lower, domain.upper))
    )
    return Mesh(nodes, diam, tuple(cells), "rectangular")


def _simplicial_mesh(domain: Box, degree: int, points: int) -> Mesh:
    from scipy.spatial import Delaunay

    n = domain.dim
    basis = monomial_basis(n, degree)

    # Candidate grid dense enough to choose well-spread nodes from.
    per_axis = max(2 * degree + 1, 7)
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(domain.lower, domain.upper)]
    cand = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)

    corners = np.array(domain.corners())
    if len(corners) > points:
        raise ValueError(
            f"cannot cover a {n}-d box with {points} nodes; need at least {len(corners)}"
        )

    # Vandermonde over candidates; scale columns for a stable pivot order.
    V = _vandermonde(cand, basis)
    V = V / np.maximum(np.linalg.norm(V, axis=0, keepdims=True), 1e-300)

    # Force corners first, then greedy QR pivoting on the rest.
    corner_rows = [int(np.argmin(np.linalg.norm(cand - c, axis=1))) for c in corners]
    chosen = list(dict.fromkeys(corner_rows))
    remaining = [i for i in range(len(cand)) if i not in set(chosen)]
    from scipy.linalg import qr

    while len(chosen) < points:
        A = V[chosen, :]  # rows already chosen
        # Project candidate rows onto the orthogonal complement of chosen rows.
        Q, _ = np.linalg.qr(A.T) if chosen else (np.zeros((V.shape[1], 0)), None)
        R = V[remaining, :] - (V[remaining, :] @ Q) @ Q.T
        best = int(np.argmax(np.linalg.norm(R, axis=1)))
        chosen.append(remaining.pop(best))

    nodes_arr = cand[chosen]
    rank = np.linalg.matrix_rank(_vandermonde(nodes_arr, basis))
    if rank < len(basis):
        raise ValueError("selected nodes are not unisolvent; refine the candidate grid")

    tri = Delaunay(nodes_arr)
    cells = tuple(tuple(int(i) for i in simplex) for simplex in tri.simplices)
    spacing = 0.0
    for cell in cells:
        pts = nodes_arr[list(cell)]
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                spacing = max(spacing, float(np.linalg.norm(pts[i] - pts[j])))
    nodes = tuple(tuple(float(v) for v in row) for row in nodes_arr)
    return Mesh(nodes, spacing, cells, "simplicial")


def _vandermonde(points: np.ndarray, basis) -> np.ndarray:
    V = np.empty((len(points), len(basis)))
    for j, mono in enumerate(basis):
        col = np.ones(len(points))
        for axis, e in enumerate(mono):
            if e:
                col = col * points[:, axis] ** e
        V[:, j] = col
    return V
