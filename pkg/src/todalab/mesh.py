"""Triangulated closed hyperbolic surfaces with holonomy bookkeeping.

A mesh is a Delta-complex: triangles may share both endpoints of an edge
and edges may be loops (the coned octagon at level 0 has both).  Each edge
therefore carries an explicit id, a stored direction (tail, head), a
hyperbolic length, and a holonomy word.

Holonomy convention: every vertex has a canonical lift (its ``position`` in
the Poincare disk); the word of an edge is the deck transformation gamma
such that the drawn representative of the edge runs from position(tail) to
gamma . position(head).  Words are lift-independent and multiply along
paths; the product of a triangle's three slot words (with signs) is the
identity in the surface group, which :meth:`HyperbolicMesh.validate`
checks by Dehn reduction.

The base surface is the genus-2 regular-octagon quotient, coned to its
center: 2 vertices, 12 edges (8 spokes + 4 boundary loops), 8 triangles.
Refinement splits every triangle 1->4 at geodesic edge midpoints, with new
lengths computed intrinsically (hyperboloid model) and new holonomy words
derived from the corner words of each triangle.  Covers are voltage-graph
lifts along a permutation action on sheets, with holonomy conjugated by a
Schreier transversal so it stays in the base group.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import group, hyperbolic
from .errors import DisconnectedCoverError, MeshError, RelatorError


@dataclass
class HyperbolicMesh:
    """Triangulated hyperbolic surface with edge holonomy.

    triangles[t]      -- the three corner vertex ids of triangle t
    tri_edges[t, k]   -- edge id of the slot joining corners k and k+1 (mod 3)
    tri_edge_signs[t, k] -- +1 if corner k sits at the stored tail of that
                         edge, -1 if the slot traverses the edge backwards
    edges[e]          -- (tail, head) vertex ids of edge e
    edge_lengths[e]   -- hyperbolic length
    edge_words[e]     -- holonomy word of the stored direction
    positions[v]      -- canonical disk lift of vertex v (complex)
    base_vertex[i]    -- for covers: base vertex under the covering map
    """

    genus: int
    level: int
    triangles: np.ndarray
    tri_edges: np.ndarray
    tri_edge_signs: np.ndarray
    edges: np.ndarray
    edge_lengths: np.ndarray
    edge_words: list
    positions: np.ndarray
    base_vertex: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    # -------------------------------------------------- basic counts
    @property
    def num_vertices(self):
        return len(self.positions)

    @property
    def num_edges(self):
        return len(self.edges)

    @property
    def num_faces(self):
        return len(self.triangles)

    @property
    def euler_characteristic(self):
        return self.num_vertices - self.num_edges + self.num_faces

    # -------------------------------------------------- derived data
    def slot_lengths(self):
        """(F, 3) lengths of each triangle's slot edges."""
        return self.edge_lengths[self.tri_edges]

    def corner_words(self, t):
        """Corner words (h0, h1, h2) of triangle t: h0 is the identity and
        h_{k+1} = h_k * word(slot k)^sign, so the drawn corner k sits at
        h_k . position(corner k)."""
        words = [()]
        for k in range(2):
            w = self.edge_words[self.tri_edges[t, k]]
            if self.tri_edge_signs[t, k] < 0:
                w = group.inverse_word(w)
            words.append(group.concat(words[-1], w))
        return words

    def triangle_word(self, t):
        """Product of the three slot words around triangle t (freely
        reduced); the identity in the surface group for any valid mesh."""
        w = ()
        for k in range(3):
            wk = self.edge_words[self.tri_edges[t, k]]
            if self.tri_edge_signs[t, k] < 0:
                wk = group.inverse_word(wk)
            w = group.concat(w, wk)
        return w

    # -------------------------------------------------- validation
    def validate(self, position_tol=1e-8):
        """Check all structural invariants; raise MeshError on failure."""
        V, E, F = self.num_vertices, self.num_edges, self.num_faces
        if self.euler_characteristic != 2 - 2 * self.genus:
            raise MeshError(
                f"Euler characteristic {self.euler_characteristic} != "
                f"{2 - 2 * self.genus} for genus {self.genus}")
        if not (self.edge_lengths > 0).all():
            raise MeshError("nonpositive edge length")
        if self.edges.min() < 0 or self.edges.max() >= V:
            raise MeshError("edge endpoint out of range")

        # each edge is used by exactly two triangle slots (closed surface)
        use_count = np.zeros(E, dtype=int)
        for t in range(F):
            for k in range(3):
                e = self.tri_edges[t, k]
                s = self.tri_edge_signs[t, k]
                use_count[e] += 1
                tail, head = self.edges[e]
                ck, ck1 = self.triangles[t, k], self.triangles[t, (k + 1) % 3]
                if s > 0 and (ck != tail or ck1 != head):
                    raise MeshError(f"slot ({t},{k}) inconsistent with edge {e}")
                if s < 0 and (ck != head or ck1 != tail):
                    raise MeshError(f"slot ({t},{k}) inconsistent with edge {e}")
        if not (use_count == 2).all():
            raise MeshError("an edge is not shared by exactly two triangle slots")

        # strict triangle inequalities (nondegeneracy)
        sl = self.slot_lengths()
        for k in range(3):
            if not (sl[:, k] < sl[:, (k + 1) % 3] + sl[:, (k + 2) % 3] - 0.0).all():
                raise MeshError("triangle inequality violated")

        # holonomy: triangle products are the identity
        for t in range(F):
            if not group.is_identity(self.triangle_word(t)):
                raise MeshError(f"triangle {t} has non-identity holonomy product")

        # drawn geometry consistent with stored lengths
        if position_tol is not None:
            err = self.position_length_defect()
            if err > position_tol:
                raise MeshError(
                    f"drawn edge lengths deviate from stored lengths by {err:.3e}")
        return True

    def position_length_defect(self):
        """Max |stored length - disk distance of the drawn representative|."""
        worst = 0.0
        for e in range(self.num_edges):
            tail, head = self.edges[e]
            m = hyperbolic.word_matrix(self.edge_words[e])
            zh = hyperbolic.mobius(m, self.positions[head])
            d = float(hyperbolic.disk_distance(self.positions[tail], zh))
            worst = max(worst, abs(d - self.edge_lengths[e]))
        return worst


# ----------------------------------------------------------------------
# Base surface

def build_base_surface(refinement=0):
    """Genus-2 octagon surface, coned to its center, refined ``refinement``
    times by geodesic midpoint subdivision."""
    if refinement < 0:
        raise ValueError("refinement must be >= 0")

    g = hyperbolic.vertex_lift_words()
    spoke = hyperbolic.SPOKE_LENGTH
    side = hyperbolic.SIDE_LENGTH

    # vertices: 0 = cone point at the origin, 1 = octagon vertex class
    positions = np.array([0.0 + 0.0j, hyperbolic.VERTEX_RADIUS + 0.0j])

    # edges 0..7: spokes center->vertex with word g_j
    # edges 8..11: boundary sides as vertex loops, word g_j^-1 g_{j+1}
    edges = []
    edge_lengths = []
    edge_words = []
    for j in range(8):
        edges.append((0, 1))
        edge_lengths.append(spoke)
        edge_words.append(g[j])
    for j in range(4):
        edges.append((1, 1))
        edge_lengths.append(side)
        edge_words.append(group.concat(group.inverse_word(g[j]), g[j + 1]))

    # triangle t_j has corners (center, P_j, P_{j+1}); its boundary slot uses
    # side class j mod 4, traversed backwards for j >= 4
    triangles = []
    tri_edges = []
    tri_signs = []
    for j in range(8):
        triangles.append((0, 1, 1))
        if j < 4:
            tri_edges.append((j, 8 + j, (j + 1) % 8))
            tri_signs.append((1, 1, -1))
        else:
            tri_edges.append((j, 8 + j - 4, (j + 1) % 8))
            tri_signs.append((1, -1, -1))

    mesh = HyperbolicMesh(
        genus=2,
        level=0,
        triangles=np.array(triangles, dtype=np.int64),
        tri_edges=np.array(tri_edges, dtype=np.int64),
        tri_edge_signs=np.array(tri_signs, dtype=np.int64),
        edges=np.array(edges, dtype=np.int64),
        edge_lengths=np.array(edge_lengths, dtype=float),
        edge_words=edge_words,
        positions=positions,
    )
    for _ in range(refinement):
        mesh = refine(mesh)
    return mesh


# ----------------------------------------------------------------------
# Refinement

def refine(mesh):
    """Split every triangle 1->4 at geodesic edge midpoints.

    New vertex ids: midpoint of edge e gets id V + e.  New edge ids: the two
    halves of edge e are e (tail half) and E + e (head half); the medial
    edge of triangle t joining the midpoints of slots k and k+1 is
    2E + 3t + k.  Midpoint positions are disk midpoints of the drawn
    representatives; medial lengths are intrinsic (hyperboloid model).
    """
    V, E, F = mesh.num_vertices, mesh.num_edges, mesh.num_faces

    # midpoint positions from drawn representatives
    head_pos = np.empty(E, dtype=complex)
    for e in range(E):
        m = hyperbolic.word_matrix(mesh.edge_words[e])
        head_pos[e] = hyperbolic.mobius(m, mesh.positions[mesh.edges[e, 1]])
    mid_pos = hyperbolic.disk_midpoint(mesh.positions[mesh.edges[:, 0]], head_pos)
    positions = np.concatenate([mesh.positions, mid_pos])

    # half edges: tail half keeps the identity word, head half carries the
    # original word (canonical representative runs tail -> gamma.head)
    half_len = mesh.edge_lengths / 2.0
    edges = [None] * (2 * E + 3 * F)
    lengths = np.empty(2 * E + 3 * F, dtype=float)
    words = [None] * (2 * E + 3 * F)
    for e in range(E):
        tail, head = mesh.edges[e]
        edges[e] = (tail, V + e)
        lengths[e] = half_len[e]
        words[e] = ()
        edges[E + e] = (V + e, head)
        lengths[E + e] = half_len[e]
        words[E + e] = mesh.edge_words[e]

    # medial lengths, intrinsically per triangle
    sl = mesh.slot_lengths()
    m0, m1, m2 = hyperbolic.medial_lengths(sl[:, 0], sl[:, 1], sl[:, 2])
    med_len = np.stack([m0, m1, m2], axis=1)
    if not np.isfinite(med_len).all() or not (med_len > 0).all():
        raise MeshError("degenerate triangle produced by refinement")

    triangles = np.empty((4 * F, 3), dtype=np.int64)
    tri_edges = np.empty((4 * F, 3), dtype=np.int64)
    tri_signs = np.empty((4 * F, 3), dtype=np.int64)

    for t in range(F):
        e_slot = mesh.tri_edges[t]
        s_slot = mesh.tri_edge_signs[t]
        v = mesh.triangles[t]
        mid = V + e_slot  # midpoint vertex id of each slot

        # corner words h_k and midpoint frame words mu_k: the midpoint of
        # slot k is drawn at mu_k . position(mid_k) with mu_k = h_k for a
        # forward slot and h_{k+1} for a backward slot
        h = mesh.corner_words(t)
        mu = [h[k] if s_slot[k] > 0 else h[(k + 1) % 3] for k in range(3)]

        for k in range(3):
            med = 2 * E + 3 * t + k
            edges[med] = (mid[k], mid[(k + 1) % 3])
            lengths[med] = med_len[t, k]
            words[med] = group.concat(group.inverse_word(mu[k]), mu[(k + 1) % 3])

        for k in range(3):
            # corner triangle at corner k: (v_k, mid_k, mid_{k-1})
            km1 = (k + 2) % 3
            row = 4 * t + k
            triangles[row] = (v[k], mid[k], mid[km1])
            # slot 0: v_k -> mid_k along edge e_slot[k]
            if s_slot[k] > 0:
                tri_edges[row, 0] = e_slot[k]          # tail half, forward
                tri_signs[row, 0] = 1
            else:
                tri_edges[row, 0] = E + e_slot[k]      # head half, backward
                tri_signs[row, 0] = -1
            # slot 1: mid_k -> mid_{k-1} = medial edge km1 reversed
            tri_edges[row, 1] = 2 * E + 3 * t + km1
            tri_signs[row, 1] = -1
            # slot 2: mid_{k-1} -> v_k along edge e_slot[k-1]
            if s_slot[km1] > 0:
                tri_edges[row, 2] = E + e_slot[km1]    # head half, forward
                tri_signs[row, 2] = 1
            else:
                tri_edges[row, 2] = e_slot[km1]        # tail half, backward
                tri_signs[row, 2] = -1
        # central triangle (mid_0, mid_1, mid_2)
        row = 4 * t + 3
        triangles[row] = (mid[0], mid[1], mid[2])
        for k in range(3):
            tri_edges[row, k] = 2 * E + 3 * t + k
            tri_signs[row, k] = 1

    return HyperbolicMesh(
        genus=mesh.genus,
        level=mesh.level + 1,
        triangles=triangles,
        tri_edges=tri_edges,
        tri_edge_signs=tri_signs,
        edges=np.array(edges, dtype=np.int64),
        edge_lengths=lengths,
        edge_words=words,
        positions=positions,
        base_vertex=None,
    )


# ----------------------------------------------------------------------
# Covers

@dataclass
class CoverSpec:
    """Finite cover described by permutation images of the four generators.

    ``generator_images`` maps letters 1..4 (the pairings a,b,c,d) to
    permutations of {0..degree-1}, acting on sheets on the right.  The
    images must kill the octagon relator (so the glued complex is a genuine
    cover) and act transitively (so it is connected).
    """

    degree: int
    generator_images: dict

    @classmethod
    def cyclic(cls, n):
        """Default cover: Z/n with a -> +1 shift, b, c, d -> 0."""
        shift = (np.arange(n, dtype=np.int64) + 1) % n
        ident = group.identity_perm(n)
        return cls(degree=n, generator_images={
            1: shift, 2: ident.copy(), 3: ident.copy(), 4: ident.copy()})

    def validate(self):
        n = self.degree
        if n < 1:
            raise ValueError("cover degree must be >= 1")
        group.check_permutations(self.generator_images, n)
        rel = group.perm_of_word(self.generator_images, group.RELATOR, n)
        if not np.array_equal(rel, group.identity_perm(n)):
            raise RelatorError(
                "generator images do not kill the octagon relator "
                f"{group.word_str(group.RELATOR)}")
        if not group.is_transitive(self.generator_images, n):
            raise DisconnectedCoverError(
                "permutation action is not transitive; cover is disconnected")
        return True


def _schreier_transversal(images, n):
    """BFS transversal: word T_s carrying sheet 0 to sheet s."""
    full = {}
    for l in range(1, group.N_GENERATORS + 1):
        p = np.asarray(images[l], dtype=np.int64)
        full[l] = p
        full[-l] = np.argsort(p)
    T = [None] * n
    T[0] = ()
    queue = [0]
    while queue:
        s = queue.pop(0)
        for l in sorted(full.keys(), key=abs):
            s2 = int(full[l][s])
            if T[s2] is None:
                T[s2] = T[s] + (l,)
                queue.append(s2)
    if any(t is None for t in T):
        raise DisconnectedCoverError(
            "permutation action is not transitive; cover is disconnected")
    return T


def build_cover(mesh, spec):
    """Voltage-graph lift of the mesh along a permutation cover spec.

    Cover cells are (cell, sheet) pairs indexed sheet-major: vertex (v, s)
    gets id s*V + v, and similarly for edges and triangles.  The edge copy
    (e, s) runs from (tail, s) to (head, s . pi(word_e)); holonomy words are
    conjugated by the Schreier transversal, T_s word T_{s'}^-1, so they stay
    in the base group where Dehn reduction still decides contractibility
    (covers inject on fundamental groups).
    """
    spec.validate()
    n = spec.degree
    images = spec.generator_images
    V, E, F = mesh.num_vertices, mesh.num_edges, mesh.num_faces

    T = _schreier_transversal(images, n)
    T_mat = [hyperbolic.word_matrix(t) for t in T]

    # right action of each edge word and corner word on sheets
    edge_perm = [group.perm_of_word(images, w, n) for w in mesh.edge_words]

    edges = np.empty((n * E, 2), dtype=np.int64)
    lengths = np.empty(n * E, dtype=float)
    words = [None] * (n * E)
    for e in range(E):
        tail, head = mesh.edges[e]
        for s in range(n):
            s_head = int(edge_perm[e][s])
            idx = s * E + e
            edges[idx] = (s * V + tail, s_head * V + head)
            lengths[idx] = mesh.edge_lengths[e]
            words[idx] = group.concat(
                T[s], mesh.edge_words[e], group.inverse_word(T[s_head]))

    triangles = np.empty((n * F, 3), dtype=np.int64)
    tri_edges = np.empty((n * F, 3), dtype=np.int64)
    tri_signs = np.empty((n * F, 3), dtype=np.int64)
    for t in range(F):
        h = mesh.corner_words(t)
        corner_perm = [group.perm_of_word(images, w, n) for w in h]
        for s in range(n):
            row = s * F + t
            # sheet of corner k when corner 0 is on sheet s
            sheets = [int(corner_perm[k][s]) for k in range(3)]
            for k in range(3):
                triangles[row, k] = sheets[k] * V + mesh.triangles[t, k]
                sgn = mesh.tri_edge_signs[t, k]
                tri_signs[row, k] = sgn
                # the edge copy whose stored tail matches the slot's tail
                anchor = sheets[k] if sgn > 0 else sheets[(k + 1) % 3]
                tri_edges[row, k] = anchor * E + mesh.tri_edges[t, k]

    positions = np.empty(n * V, dtype=complex)
    base_vertex = np.empty(n * V, dtype=np.int64)
    for s in range(n):
        positions[s * V:(s + 1) * V] = hyperbolic.mobius(T_mat[s], mesh.positions)
        base_vertex[s * V:(s + 1) * V] = np.arange(V)

    return HyperbolicMesh(
        genus=n * (mesh.genus - 1) + 1,
        level=mesh.level,
        triangles=triangles,
        tri_edges=tri_edges,
        tri_edge_signs=tri_signs,
        edges=edges,
        edge_lengths=lengths,
        edge_words=words,
        positions=positions,
        base_vertex=base_vertex,
    )


# ----------------------------------------------------------------------
# Serialization

def mesh_to_dict(mesh):
    """JSON-ready dict; arrays in ascending index order for exact round trips."""
    doc = {
        "genus": int(mesh.genus),
        "level": int(mesh.level),
        "vertices": int(mesh.num_vertices),
        "triangles": [[int(v) for v in row] for row in mesh.triangles],
        "edge_lengths": [
            [int(mesh.edges[e, 0]), int(mesh.edges[e, 1]), float(mesh.edge_lengths[e])]
            for e in range(mesh.num_edges)],
        "holonomy": [
            [int(mesh.edges[e, 0]), int(mesh.edges[e, 1]),
             group.word_str(mesh.edge_words[e])]
            for e in range(mesh.num_edges)],
        "tri_edges": [[int(v) for v in row] for row in mesh.tri_edges],
        "tri_edge_signs": [[int(v) for v in row] for row in mesh.tri_edge_signs],
        "positions": [[float(z.real), float(z.imag)] for z in mesh.positions],
    }
    if mesh.base_vertex is not None:
        doc["base_vertex"] = [int(v) for v in mesh.base_vertex]
    return doc


def mesh_from_dict(doc):
    edge_rows = doc["edge_lengths"]
    hol_rows = doc["holonomy"]
    if len(edge_rows) != len(hol_rows):
        raise MeshError("edge_lengths and holonomy tables disagree")
    edges = np.array([[r[0], r[1]] for r in edge_rows], dtype=np.int64)
    for r_len, r_hol in zip(edge_rows, hol_rows):
        if r_len[0] != r_hol[0] or r_len[1] != r_hol[1]:
            raise MeshError("edge_lengths and holonomy tables disagree")
    positions = np.array([complex(re, im) for re, im in doc["positions"]])
    base_vertex = None
    if doc.get("base_vertex") is not None:
        base_vertex = np.array(doc["base_vertex"], dtype=np.int64)
    mesh = HyperbolicMesh(
        genus=int(doc["genus"]),
        level=int(doc["level"]),
        triangles=np.array(doc["triangles"], dtype=np.int64),
        tri_edges=np.array(doc["tri_edges"], dtype=np.int64),
        tri_edge_signs=np.array(doc["tri_edge_signs"], dtype=np.int64),
        edges=edges,
        edge_lengths=np.array([r[2] for r in edge_rows], dtype=float),
        edge_words=[group.parse_word(r[2]) for r in hol_rows],
        positions=positions,
        base_vertex=base_vertex,
    )
    if int(doc["vertices"]) != mesh.num_vertices:
        raise MeshError("vertex count disagrees with position table")
    return mesh


def mesh_to_json(mesh):
    return json.dumps(mesh_to_dict(mesh), indent=1, sort_keys=True)


def mesh_from_json(text):
    return mesh_from_dict(json.loads(text))
