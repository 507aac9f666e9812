"""Normal-bundle curvature equation: variational ascent, Newton, stability."""

import numpy as np
import pytest

from todalab import gauss as G
from todalab import operators as ops
from todalab import ricci as R
from todalab import sections as S
from todalab.errors import InfeasibleDegree
from todalab.mesh import build_base_surface


@pytest.fixture(scope="module")
def mesh():
    return build_base_surface(refinement=2)


@pytest.fixture(scope="module")
def problem(mesh):
    """Variable-data instance: degree-1 density scaled well below 2/9."""
    dens = S.synth_density(mesh, S.Divisor([(5, 1)]))
    scaled = S.SectionDensity(
        mesh=mesh, log_density=dens.log_density + np.log(0.08),
        divisor=dens.divisor, curvature_constant=dens.curvature_constant,
        normalization="scaled")
    f = scaled.density()
    u = G.solve_gauss(G.GaussProblem(mesh=mesh, f=f, tol=1e-12)).u
    return R.RicciProblem(mesh=mesh, u=u, density=scaled)


def constant_density(mesh, amplitude):
    n = mesh.num_vertices
    return S.SectionDensity(
        mesh=mesh, log_density=np.full(n, np.log(amplitude)),
        divisor=S.Divisor([]), curvature_constant=0.0,
        normalization="manual")


def zero_mean_direction(mesh, rng):
    m = ops.mass_vector(mesh)
    d = rng.standard_normal(mesh.num_vertices)
    d -= (m @ d) / m.sum()
    return d / np.abs(d).max()


def test_problem_defaults_and_zero_density(mesh):
    dens = S.synth_density(mesh, S.Divisor([(5, 1)]))
    u = np.zeros(mesh.num_vertices)
    prob = R.RicciProblem(mesh=mesh, u=u, density=dens)
    assert prob.c == dens.curvature_constant
    assert np.array_equal(prob.log_weight(), dens.log_density - 2 * u)

    with pytest.raises(InfeasibleDegree):
        R.RicciProblem(mesh=mesh, u=u, density=S.SectionDensity.zero(mesh),
                       c=0.25)


def test_eval_J_rejects_nonzero_mean(problem):
    w = np.ones(problem.mesh.num_vertices)
    with pytest.raises(ValueError):
        R.eval_J(problem, w)


def test_gradient_matches_central_differences(problem):
    rng = np.random.default_rng(7)
    mesh = problem.mesh
    w = 0.1 * zero_mean_direction(mesh, rng)
    g = R.grad_J(problem, w)
    m = ops.mass_vector(mesh)
    h = 1e-5
    for _ in range(10):
        d = zero_mean_direction(mesh, rng)
        num = (R.eval_J(problem, w + h * d)
               - R.eval_J(problem, w - h * d)) / (2 * h)
        ana = float((m * g) @ d)
        assert num == pytest.approx(ana, rel=1e-6)


def test_constant_data_closed_form(mesh):
    for amp, u0, c in [(1.0, -0.2, 0.3), (2.0, -0.35, 0.5)]:
        dens = constant_density(mesh, amp)
        u = np.full(mesh.num_vertices, u0)
        prob = R.RicciProblem(mesh=mesh, u=u, density=dens, c=c)
        sol = R.maximize_J(prob)
        expected = 0.5 * np.log(c * np.exp(2 * u0) / amp)
        assert np.abs(sol.v - expected).max() < 1e-9
        assert sol.mean_constraint_residual < 1e-10
        assert R.equation_residual(prob, sol.v) < 1e-9
        assert sol.J_value >= R.eval_J(prob, np.zeros(mesh.num_vertices))


def test_variational_solution(problem):
    sol = R.maximize_J(problem)
    assert sol.method == "variational"
    assert sol.grad_norm < 1e-9
    assert sol.mean_constraint_residual < 1e-10
    assert R.equation_residual(problem, sol.v) < 1e-8
    assert sol.J_value >= R.eval_J(problem,
                                   np.zeros(problem.mesh.num_vertices))
    d = sol.to_dict(problem)
    assert set(d) == {"J_value", "grad_norm", "mean_residual", "c", "degree"}
    assert d["degree"] == 1


def test_newton_seeded_at_variational(problem):
    var = R.maximize_J(problem)
    newt = R.solve_ricci_newton(problem, v_init=var.v)
    assert newt.method == "newton"
    assert newt.iterations <= 3
    assert np.abs(newt.v - var.v).max() < 1e-8
    assert newt.v_shift_from_init < 1e-6


def test_newton_far_seed_records_shift(problem):
    var = R.maximize_J(problem)
    seed = var.v + 0.2
    newt = R.solve_ricci_newton(problem, v_init=seed)
    assert newt.v_shift_from_init > 0.05
    assert R.equation_residual(problem, newt.v) < problem.tol


def test_stability_window_empty(problem):
    sol = R.maximize_J(problem)
    f_eff = np.exp(problem.log_weight())
    rep = R.stability_check(problem.mesh, sol.v, f_eff)
    assert rep.hypothesis_ok
    assert rep.sup_term < rep.lambda1
    assert rep.window_empty or not rep.violating
    assert not rep.violating
    assert rep.c == pytest.approx(problem.c, abs=1e-9)
    assert rep.hinv_norm <= 1.1 * rep.hinv_bound
    d = rep.to_dict()
    assert {"sup_term", "lambda1", "window", "violating", "c",
            "hypothesis_ok", "hinv_norm", "hinv_bound",
            "window_empty"} <= set(d)


def test_stability_constant_exact(mesh):
    # Constant case: weight e^{2v} f is the constant c, spectrum of
    # -Delta + 2c relative to M is {2c, 2c - lambda_k}: window (2c - l1, 2c)
    # is empty exactly.
    c, u0 = 0.3, -0.2
    dens = constant_density(mesh, 1.0)
    u = np.full(mesh.num_vertices, u0)
    prob = R.RicciProblem(mesh=mesh, u=u, density=dens, c=c)
    sol = R.maximize_J(prob)
    f_eff = np.exp(prob.log_weight())
    rep = R.stability_check(mesh, sol.v, f_eff)
    assert rep.sup_term == pytest.approx(2 * c, rel=1e-9)
    assert rep.window_empty
    assert rep.hinv_norm == pytest.approx(1.0 / (2 * c), rel=1e-6)


def test_mt_probe_properties(mesh):
    val = R.mt_probe(mesh, samples=4, seed=0)
    again = R.mt_probe(mesh, samples=4, seed=0)
    assert val == again
    assert val > 0
    other = R.mt_probe(mesh, samples=4, seed=1)
    assert other > 0


def test_field_to_csv(mesh):
    text = R.field_to_csv("v", np.zeros(3))
    lines = text.splitlines()
    assert lines[0] == "vertex_index,v"
    assert lines[1] == "0,0.0"
