"""Laplacian assembly, spectra, and shortest noncontractible loops."""

import numpy as np
import pytest
import scipy.linalg as sla

from todalab import operators as ops
from todalab.mesh import CoverSpec, build_base_surface, build_cover

# First nonzero Laplace eigenvalue of the underlying smooth surface,
# computed independently by spectral methods in the literature; the
# discrete values converge to it from above as the mesh refines.
SMOOTH_LAMBDA1 = 3.838887258


@pytest.fixture(scope="module")
def mesh2():
    return build_base_surface(refinement=2)


@pytest.fixture(scope="module")
def mesh3():
    return build_base_surface(refinement=3)


def test_laplacian_structure(mesh2):
    L, M = ops.laplacian(mesh2)
    V = mesh2.num_vertices
    ones = np.ones(V)
    # Constants are harmonic and the operator is symmetric.
    assert np.abs(L @ ones).max() < 1e-12
    assert np.abs((L - L.T).toarray()).max() < 1e-13
    # Mass is the lumped triangle-area measure.
    m = ops.mass_vector(mesh2)
    assert np.allclose(M.diagonal(), m)
    assert m.sum() == pytest.approx(4 * np.pi, abs=1e-10)
    assert (m > 0).all()


def test_stiffness_positive_semidefinite(mesh2):
    S = ops.stiffness(mesh2).toarray()
    eigs = sla.eigvalsh(S)
    assert eigs[0] > -1e-10
    assert eigs[1] > 1e-6  # only constants are in the kernel


def test_mass_level0_closed_forms():
    m0 = build_base_surface(refinement=0)
    mass = ops.mass_vector(m0)
    # Center sits in 8 triangles of area pi/2; the corner vertex holds the
    # two remaining corners of each.
    assert mass[0] == pytest.approx(8 * (np.pi / 2) / 3, abs=1e-12)
    assert mass[1] == pytest.approx(16 * (np.pi / 2) / 3, abs=1e-12)


def test_spectral_gap_report(mesh2):
    rep = ops.spectral_gap(mesh2)
    assert abs(rep.lambda0) <= 1e-10
    assert rep.lambda1 > 0
    assert rep.volume == pytest.approx(4 * np.pi, rel=1e-10)
    assert rep.systole == pytest.approx(3.0571418389619964, abs=1e-12)
    d = rep.to_dict()
    assert set(d) == {"lambda0", "lambda1", "systole", "volume", "tol",
                      "seed"}


def test_lambda1_converges_to_smooth_value(mesh3):
    rep = ops.spectral_gap(mesh3)
    # Discrete convergence from above: level 3 is within 0.08.
    assert rep.lambda1 > SMOOTH_LAMBDA1 - 1e-6
    assert rep.lambda1 == pytest.approx(SMOOTH_LAMBDA1, abs=0.08)


def test_constant_eigenvector(mesh2):
    vals, vecs = ops.eig_low(mesh2, k=2)
    v0 = vecs[:, 0]
    assert np.abs(v0 - v0.mean()).max() < 1e-8 * max(1.0, abs(v0.mean()))


def test_sparse_matches_dense_on_cover(mesh3):
    cover = build_cover(mesh3, CoverSpec.cyclic(2))
    assert cover.num_vertices == 508
    vals_sparse, _ = ops.eig_low(cover, k=4)
    S = ops.stiffness(cover).toarray()
    m = ops.mass_vector(cover)
    vals_dense = sla.eigh(S, np.diag(m), eigvals_only=True,
                          subset_by_index=[0, 3])
    assert np.abs(vals_sparse - vals_dense).max() < 1e-8


def test_cover_spectrum_contains_base(mesh2):
    cover = build_cover(mesh2, CoverSpec.cyclic(3))
    base_vals, _ = ops.eig_low(mesh2, k=2)
    cover_vals, _ = ops.eig_low(cover, k=10)
    for bv in base_vals:
        assert np.abs(cover_vals - bv).min() < 1e-6


def test_systole_frozen_value():
    # Every base level and cyclic cover keeps the octagon side loops,
    # which realize the shortest noncontractible length.
    expected = 2 * np.arccosh(1 + np.sqrt(2.0))
    for r in range(3):
        m = build_base_surface(refinement=r)
        assert ops.systole(m) == pytest.approx(expected, abs=1e-12)
    cover = build_cover(build_base_surface(refinement=1),
                        CoverSpec.cyclic(2))
    assert ops.systole(cover) == pytest.approx(expected, abs=1e-12)


def test_graph_distances(mesh2):
    d = ops.graph_distances(mesh2, 0)
    assert d[0] == 0
    assert (d > 0).sum() == mesh2.num_vertices - 1
    # One-edge neighbors are at exactly the edge length.
    e = 0
    t, h = mesh2.edges[e]
    assert d[h] <= d[t] + mesh2.edge_lengths[e] + 1e-12
    d5 = ops.graph_distances(mesh2, 5)
    assert d5[0] == pytest.approx(d[5], abs=1e-12)


def test_determinism(mesh2):
    r1 = ops.spectral_gap(mesh2, seed=3)
    r2 = ops.spectral_gap(mesh2, seed=3)
    assert r1.lambda1 == r2.lambda1
    assert r1.to_dict() == r2.to_dict()
