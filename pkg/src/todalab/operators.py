"""Discrete operators on hyperbolic meshes: Laplacian, spectrum, systole.

The stiffness matrix uses cotangent weights computed from hyperbolic
corner angles (law of cosines on the stored edge lengths); the mass matrix
is lumped, one third of each triangle's hyperbolic area per corner.  The
Laplacian is returned negative semidefinite (L = -S), so the eigenproblem
of interest is S x = lambda M x with lambda >= 0; lambda1 is the spectral
gap in the usual convention (some formulas elsewhere use its reciprocal;
conversions happen at the point of use and are recorded there).

The systole is approximated on the edge graph: the shortest closed edge
loop whose accumulated holonomy word is not the identity.  Every such loop
is at least as long as the translation length of its word, hence at least
the true systole; the octagon side loops realize the true systole exactly
at every refinement level, so for this family the bound is sharp.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import group, hyperbolic
from .errors import MeshError, NonConvergence


# ----------------------------------------------------------------------
# Assembly

def triangle_geometry(mesh):
    """(angles, areas): per-triangle corner angles (F,3) and areas (F,)."""
    key = "triangle_geometry"
    if key not in mesh._cache:
        sl = mesh.slot_lengths()
        a0, a1, a2 = hyperbolic.triangle_angles(sl[:, 0], sl[:, 1], sl[:, 2])
        angles = np.stack([a0, a1, a2], axis=1)
        if not np.isfinite(angles).all() or (angles <= 0).any():
            raise MeshError("degenerate triangle (bad corner angle)")
        areas = np.pi - angles.sum(axis=1)
        if (areas <= 0).any():
            raise MeshError("degenerate triangle (nonpositive area)")
        mesh._cache[key] = (angles, areas)
    return mesh._cache[key]


def volume(mesh):
    """Total hyperbolic area, the sum of triangle angle defects."""
    _, areas = triangle_geometry(mesh)
    return float(areas.sum())


def mass_vector(mesh):
    """Lumped vertex areas: one third of each incident triangle's area."""
    key = "mass_vector"
    if key not in mesh._cache:
        _, areas = triangle_geometry(mesh)
        m = np.zeros(mesh.num_vertices)
        for k in range(3):
            np.add.at(m, mesh.triangles[:, k], areas / 3.0)
        mesh._cache[key] = m
    return mesh._cache[key]


def laplacian(mesh):
    """Cotangent Laplacian (negative semidefinite) and lumped mass matrix.

    Returns (L, M) with L = -S for the PSD stiffness S, so that
    g^T L f = -(discrete Dirichlet pairing of f and g); rows of L sum to 0.
    """
    key = "laplacian"
    if key not in mesh._cache:
        angles, _ = triangle_geometry(mesh)
        V = mesh.num_vertices
        rows, cols, data = [], [], []
        for k in range(3):
            w = 0.5 / np.tan(angles[:, (k + 2) % 3])
            if not np.isfinite(w).all():
                raise MeshError("degenerate triangle (non-finite cotan weight)")
            i = mesh.triangles[:, k]
            j = mesh.triangles[:, (k + 1) % 3]
            rows.extend([i, j, i, j])
            cols.extend([i, j, j, i])
            data.extend([w, w, -w, -w])
        S = sp.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(V, V)).tocsr()
        M = sp.diags(mass_vector(mesh)).tocsr()
        mesh._cache[key] = (-S, M)
    return mesh._cache[key]


def stiffness(mesh):
    """PSD stiffness matrix S = -L."""
    L, _ = laplacian(mesh)
    return -L


# ----------------------------------------------------------------------
# Spectrum

def eig_low(mesh, k=2, tol=1e-9, seed=0):
    """Smallest k generalized eigenpairs of S x = lambda M x, ascending.

    Deterministic: the iterative solver is started from a fixed seeded
    vector; small problems (or an iterative failure) fall back to a dense
    solve.
    """
    S = stiffness(mesh)
    M = sp.diags(mass_vector(mesh)).tocsr()
    V = S.shape[0]
    if V <= max(4 * k + 20, 300):
        return _eig_dense(S, M, k)
    rng = np.random.default_rng(seed)
    v0 = np.ones(V) + 0.01 * rng.standard_normal(V)
    try:
        vals, vecs = spla.eigsh(S, k=k, M=M, sigma=-0.05, which="LM",
                                v0=v0, tol=tol)
    except Exception:
        return _eig_dense(S, M, k)
    order = np.argsort(vals)
    return vals[order], vecs[:, order]


def _eig_dense(S, M, k):
    from scipy.linalg import eigh
    vals, vecs = eigh(S.toarray(), M.toarray())
    return vals[:k], vecs[:, :k]


@dataclass
class SpectralReport:
    lambda0: float
    lambda1: float
    systole: float
    volume: float
    eigen_tolerance: float
    seed: int

    def to_dict(self):
        return {"lambda0": self.lambda0, "lambda1": self.lambda1,
                "systole": self.systole, "volume": self.volume,
                "tol": self.eigen_tolerance, "seed": self.seed}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def spectral_gap(mesh, tol=1e-9, seed=0):
    """Smallest two Laplace eigenvalues plus systole and volume."""
    vals, _ = eig_low(mesh, k=2, tol=tol, seed=seed)
    lam0, lam1 = float(vals[0]), float(vals[1])
    if not np.isfinite([lam0, lam1]).all():
        raise NonConvergence("eigensolver returned non-finite eigenvalues")
    return SpectralReport(lambda0=lam0, lambda1=lam1, systole=systole(mesh),
                          volume=volume(mesh), eigen_tolerance=tol, seed=seed)


# ----------------------------------------------------------------------
# Systole on the edge graph

def _adjacency(mesh):
    key = "adjacency"
    if key not in mesh._cache:
        adj = [[] for _ in range(mesh.num_vertices)]
        for e in range(mesh.num_edges):
            tail, head = mesh.edges[e]
            l = mesh.edge_lengths[e]
            adj[tail].append((int(head), float(l), e, 1))
            adj[head].append((int(tail), float(l), e, -1))
        mesh._cache[key] = adj
    return mesh._cache[key]


def _dijkstra(mesh, src, cap):
    """Distances and parent (edge, direction, vertex) from src, capped."""
    V = mesh.num_vertices
    adj = _adjacency(mesh)
    dist = np.full(V, np.inf)
    parent = [None] * V  # (edge id, direction, previous vertex)
    dist[src] = 0.0
    heap = [(0.0, src)]
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist[v] or d > cap:
            continue
        for (w, l, e, direction) in adj[v]:
            nd = d + l
            if nd < dist[w]:
                dist[w] = nd
                parent[w] = (e, direction, v)
                heapq.heappush(heap, (nd, w))
    return dist, parent


def _tree_word(mesh, src, parent, v, memo):
    if v == src:
        return ()
    if v in memo:
        return memo[v]
    e, direction, prev = parent[v]
    w = mesh.edge_words[e]
    if direction < 0:
        w = group.inverse_word(w)
    out = group.concat(_tree_word(mesh, src, parent, prev, memo), w)
    memo[v] = out
    return out


def systole(mesh):
    """Length of the shortest edge loop with non-identity holonomy."""
    key = "systole"
    if key in mesh._cache:
        return mesh._cache[key]
    best = np.inf
    E = mesh.num_edges
    lengths = mesh.edge_lengths
    for src in range(mesh.num_vertices):
        dist, parent = _dijkstra(mesh, src, best)
        memo = {}
        # candidate loops: tree path + one non-tree edge + reverse tree path
        order = []
        for e in range(E):
            x, y = mesh.edges[e]
            if parent[x] is not None and parent[x][0] == e:
                continue
            if parent[y] is not None and parent[y][0] == e:
                continue
            total = dist[x] + dist[y] + lengths[e]
            if total < best:
                order.append((total, e))
        order.sort()
        for total, e in order:
            if total >= best:
                break
            x, y = mesh.edges[e]
            word = group.concat(
                _tree_word(mesh, src, parent, int(x), memo),
                mesh.edge_words[e],
                group.inverse_word(_tree_word(mesh, src, parent, int(y), memo)))
            if not group.is_identity(word):
                best = total
                break
    mesh._cache[key] = float(best)
    return float(best)


def graph_distances(mesh, src, cap=np.inf):
    """Single-source graph distances along edge lengths."""
    dist, _ = _dijkstra(mesh, src, cap)
    return dist
