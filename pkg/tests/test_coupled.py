"""Coupled fixed-point driver, certificates, and obstruction behavior."""

import numpy as np
import pytest

from todalab import coupled as C
from todalab import gauss as G
from todalab import operators as ops
from todalab import ricci as R
from todalab import sections as S
from todalab.errors import (AdmissibilityLost, DegreeRangeError,
                            InfeasibleDegree)
from todalab.mesh import CoverSpec, build_base_surface, build_cover


@pytest.fixture(scope="module")
def mesh():
    return build_base_surface(refinement=2)


@pytest.fixture(scope="module")
def cover_setup(mesh):
    base_dens = S.synth_density(
        mesh, S.Divisor([(0, 1), (1, 1), (5, 1), (20, 1)]))
    cover = build_cover(mesh, CoverSpec.cyclic(2))
    dens, _ = S.balanced_lift(base_dens, cover, z_n=3)
    return cover, dens


def constant_flat_density(mesh):
    n = mesh.num_vertices
    return S.SectionDensity(mesh=mesh, log_density=np.zeros(n),
                            divisor=S.Divisor([]), curvature_constant=0.0,
                            normalization="manual")


def test_degree_bound_check():
    assert C.degree_bound_check(0, 2)
    assert C.degree_bound_check(1, 2)
    assert C.degree_bound_check(2, 2)
    assert not C.degree_bound_check(3, 2)
    assert not C.degree_bound_check(-1, 2)
    assert C.degree_bound_check(8, 5)
    assert not C.degree_bound_check(9, 5)


def test_config_validation():
    with pytest.raises(ValueError):
        C.CoupledConfig(eta=1.0)
    with pytest.raises(ValueError):
        C.CoupledConfig(damping=0.0)
    with pytest.raises(ValueError):
        C.CoupledConfig(t=1.5)
    cfg = C.CoupledConfig()
    assert cfg.eta == 0.5 and cfg.degree == 1 and cfg.t is None


def test_degree_out_of_range_refused(mesh):
    dens = S.synth_density(mesh, S.Divisor([(5, 1)]))
    with pytest.raises(DegreeRangeError):
        C.solve_coupled(mesh, dens, C.CoupledConfig(degree=3))


def test_zero_section_positive_degree_infeasible(mesh):
    with pytest.raises(InfeasibleDegree):
        C.solve_coupled(mesh, S.SectionDensity.zero(mesh),
                        C.CoupledConfig(degree=1))


def test_zero_section_zero_degree_is_trivial(mesh):
    result = C.solve_coupled(mesh, S.SectionDensity.zero(mesh),
                             C.CoupledConfig(degree=0))
    u, v, cert = result
    assert np.abs(u).max() == 0
    assert np.abs(v).max() == 0
    assert cert.sup_af == 0.0
    assert cert.converged
    assert cert.almost_fuchsian
    assert cert.gauss_residual < 1e-12
    assert cert.ricci_residual < 1e-12


def test_admissibility_lost_with_pinned_scale(cover_setup):
    cover, dens = cover_setup
    cfg = C.CoupledConfig(degree=1, t=1.0, eta=0.5)
    with pytest.raises(AdmissibilityLost):
        C.solve_coupled(cover, dens, cfg)


def test_base_run_converges(mesh):
    dens = S.synth_density(mesh, S.Divisor([(5, 1)]))
    result = C.solve_coupled(mesh, dens, C.CoupledConfig(degree=1))
    cert = result.certificate
    assert cert.converged
    assert cert.outer_iters <= 100
    assert cert.sup_af < 0.5
    assert cert.almost_fuchsian
    assert cert.gauss_residual <= 1e-7
    assert cert.ricci_residual <= 1e-7
    assert cert.mean_residual <= 1e-7
    assert cert.admissibility_margin > 0
    assert 0 < cert.t <= 1
    history = result.residual_history
    assert history[-1] <= 1e-8
    tail = history[-10:]
    assert all(a >= b for a, b in zip(tail, tail[1:]))
    # Box containment of the converged metric factor.
    assert result.u.min() >= -0.5 * np.log(2.0) - 1e-9
    assert result.u.max() <= 1e-9


def test_cover_run_matches_frozen_profile(cover_setup):
    cover, dens = cover_setup
    result = C.solve_coupled(cover, dens, C.CoupledConfig(degree=1))
    cert = result.certificate
    assert cert.converged
    assert cert.genus == 3
    assert cert.degree == 1
    assert cert.sup_af < 0.5
    assert cert.gauss_residual <= 1e-7
    assert cert.ricci_residual <= 1e-7
    # First bundle solve at the chosen t stays below the eta = 1/2 bound.
    assert np.exp(dens.log_density + 2 * result.v).max() \
        <= G.admissible_bound(0.5) + 1e-12


def test_certify_constant_closed_form(mesh):
    u0 = -0.2
    c = 1.0 - np.exp(2 * u0)
    n = mesh.num_vertices
    dens = constant_flat_density(mesh)
    u = np.full(n, u0)
    v = np.full(n, 0.5 * np.log(c * np.exp(2 * u0)))
    t = c * ops.volume(mesh) / (2 * np.pi)
    cert = C.certify(mesh, u, v, dens, eta=1.0, degree=1, t=t)
    assert cert.gauss_residual < 1e-12
    assert cert.ricci_residual < 1e-12
    assert cert.mean_residual < 1e-12
    assert cert.sup_af == pytest.approx(c * np.exp(-2 * u0), rel=1e-12)
    assert cert.almost_fuchsian
    assert cert.genus == 2
    d = cert.to_dict()
    assert d["almost_fuchsian"] is True
    assert len(d) == 14


def test_certify_detects_perturbation(mesh):
    u0 = -0.2
    c = 1.0 - np.exp(2 * u0)
    n = mesh.num_vertices
    dens = constant_flat_density(mesh)
    u = np.full(n, u0)
    v = np.full(n, 0.5 * np.log(c * np.exp(2 * u0)))
    t = c * ops.volume(mesh) / (2 * np.pi)
    clean = C.certify(mesh, u, v, dens, eta=1.0, degree=1, t=t)
    bad = C.certify(mesh, u + 0.1, v, dens, eta=1.0, degree=1, t=t)
    assert bad.gauss_residual > 1e-3
    assert bad.gauss_residual > 10 * clean.gauss_residual
    assert bad.ricci_residual > 1e-3


def test_full_system_residual_single_component(mesh):
    dens = S.synth_density(mesh, S.Divisor([(5, 1)]))
    result = C.solve_coupled(mesh, dens, C.CoupledConfig(degree=1))
    zero = S.SectionDensity.zero(mesh)
    c_eff = result.certificate.t * 2 * np.pi / ops.volume(mesh)
    r_g, r_r = C.full_system_residual(mesh, result.u, result.v,
                                      dens, zero, c_eff)
    f = np.exp(dens.log_density + 2 * result.v)
    prob = R.RicciProblem(mesh=mesh, u=result.u, density=dens, c=c_eff)
    assert r_g == pytest.approx(G.gauss_residual(mesh, result.u, f),
                                abs=1e-14)
    assert r_r == pytest.approx(R.equation_residual(prob, result.v),
                                abs=1e-14)


def test_full_system_residual_trivial(mesh):
    zero = S.SectionDensity.zero(mesh)
    n = mesh.num_vertices
    r_g, r_r = C.full_system_residual(mesh, np.zeros(n), np.zeros(n),
                                      zero, zero, 0.0)
    assert r_g == 0.0
    assert r_r == 0.0


def test_superminimality_audit(mesh):
    n = mesh.num_vertices
    alpha = constant_flat_density(mesh)
    beta = S.SectionDensity.zero(mesh)
    assert C.superminimality_audit(alpha, beta) == 0.0
    both = S.SectionDensity(mesh=mesh, log_density=np.full(n, -3.0),
                            divisor=S.Divisor([]), curvature_constant=0.0,
                            normalization="manual")
    assert C.superminimality_audit(both, beta) == -3.0
    assert C.superminimality_audit(beta, beta) == -np.inf
