"""Shared fixtures: deck-invariant smooth bump fields built from positions."""

import numpy as np

from todalab import group as G
from todalab import hyperbolic as H


def enumerate_translates(cutoff, max_len=3):
    """Disk positions of gamma . 0 for all short words within the cutoff."""
    words = [()]
    seen = [np.eye(2, dtype=complex)]
    frontier = [()]
    for _ in range(max_len):
        newfrontier = []
        for w in frontier:
            for letter in range(-G.N_GENERATORS, G.N_GENERATORS + 1):
                if letter == 0:
                    continue
                w2 = G.free_reduce(w + (letter,))
                if len(w2) != len(w) + 1:
                    continue
                m2 = H.word_matrix(w2)
                if any(H.projective_close(m2, s, tol=1e-8) for s in seen):
                    continue
                seen.append(m2)
                words.append(w2)
                newfrontier.append(w2)
        frontier = newfrontier
    centers = []
    for w in words:
        z = H.mobius(H.word_matrix(w), 0.0)
        if H.disk_distance(0.0, z) <= cutoff:
            centers.append(z)
    return np.array(centers)


def bump_value(z, centers, radius, amplitude):
    d = H.disk_distance(np.full(len(centers), z), centers)
    mask = d < radius
    if not mask.any():
        return 0.0
    x = (d[mask] / radius) ** 2
    return float((amplitude * np.exp(1.0 - 1.0 / (1.0 - x))).sum())


def invariant_bump(mesh, radius=1.0, amplitude=0.05):
    """Smooth compactly-supported bump around the octagon center, summed
    over nearby deck translates so the vertex values are independent of
    the choice of lifts."""
    centers = enumerate_translates(2.4485 + radius + 0.1)
    return np.array([bump_value(z, centers, radius, amplitude)
                     for z in mesh.positions])
