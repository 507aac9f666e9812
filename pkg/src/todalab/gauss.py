"""Scalar curvature equation solver: Delta u = e^{2u} - 1 + e^{-2u} f.

The conformal factor u of the induced metric on a surface with constant
curvature -1 background satisfies this semilinear equation, with data
f >= 0 coming from the second fundamental form.  When the data obey the
smallness bound

    sup f <= eta / (1 + eta)^2,          eta in (0, 1],

the solution is trapped in the box [-(1/2) ln(1+eta), 0]: the constants
u = -(1/2) ln(1+eta) and u = 0 are sub/supersolutions there, and on the
box the nonlinearity R(u) = e^{2u} - 1 + e^{-2u} f has derivative
2 e^{2u} - 2 e^{-2u} f >= 0, so the discrete problem S u + M R(u) = 0 has
a monotone structure with a unique solution in the box.

Two solvers are provided: a damped Newton iteration (fast, used by
default) and a monotone fixed-point scheme (S + lam M) u+ = lam M u - M R(u)
whose iterates decrease from the supersolution u = 0, useful as an
independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import operators
from .errors import AdmissibilityError, NonConvergence


def admissible_bound(eta):
    """Largest sup f compatible with the trapping box, eta/(1+eta)^2."""
    if not 0 < eta <= 1:
        raise ValueError("eta must lie in (0, 1]")
    return eta / (1.0 + eta) ** 2


@dataclass
class GaussProblem:
    mesh: object
    f: np.ndarray
    eta: float = 1.0
    tol: float = 1e-10

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=float)
        if self.f.shape != (self.mesh.num_vertices,):
            raise ValueError("data f must be a per-vertex array")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        if (self.f < 0).any():
            raise AdmissibilityError("data f must be nonnegative")
        bound = admissible_bound(self.eta)
        if self.f.max() > bound:
            raise AdmissibilityError(
                f"sup f = {self.f.max():.6g} exceeds the admissible bound "
                f"{bound:.6g} for eta = {self.eta}")

    @property
    def box_lower(self):
        return -0.5 * np.log1p(self.eta)

    def admissibility_margin(self):
        return float(admissible_bound(self.eta) - self.f.max())


@dataclass
class GaussSolution:
    u: np.ndarray
    residual_norm: float
    iterations: int
    box_margin: float
    method: str = "newton"

    def to_dict(self, problem):
        return {"residual": self.residual_norm,
                "iterations": self.iterations,
                "eta": problem.eta,
                "box_margin": self.box_margin}


def gauss_residual(mesh, u, f):
    """Pointwise defect |M^{-1} L u - (e^{2u} - 1 + e^{-2u} f)|_inf."""
    L, _ = operators.laplacian(mesh)
    m = operators.mass_vector(mesh)
    lap = (L @ u) / m
    return float(np.abs(lap - _reaction(u, f)).max())


def _reaction(u, f):
    return np.exp(2.0 * u) - 1.0 + np.exp(-2.0 * u) * f


def _reaction_slope(u, f):
    return 2.0 * np.exp(2.0 * u) - 2.0 * np.exp(-2.0 * u) * f


def warm_start(problem):
    """Constant-data solution of e^{2u} - 1 + e^{-2u} f = 0 applied pointwise.

    Solving the quadratic in x = e^{2u} gives x = (1 + sqrt(1 - 4f)) / 2,
    which stays in the admissible box for any admissible f (the bound
    sup f <= eta/(1+eta)^2 forces 1 - 4f >= ((1-eta)/(1+eta))^2, hence
    x >= 1/(1+eta)).  Exact when f is constant, including the double root
    f = 1/4 at eta = 1.
    """
    disc = np.clip(1.0 - 4.0 * problem.f, 0.0, None)
    x = 0.5 * (1.0 + np.sqrt(disc))
    return 0.5 * np.log(x)


def _box_margin(u, lower):
    return float(min((u - lower).min(), (0.0 - u).min()))


def solve_gauss(problem, u0=None):
    """Damped Newton for S u + M R(u) = 0 inside the trapping box.

    The Jacobian S + M diag(R'(u)) is positive definite on the box because
    R' >= 0 there, so the Newton direction exists; backtracking keeps the
    iterates in a slightly inflated box.  Residuals are checked before the
    first step, so exact warm starts return in zero iterations.
    """
    mesh = problem.mesh
    S = operators.stiffness(mesh)
    m = operators.mass_vector(mesh)
    M = sp.diags(m)
    lower = problem.box_lower
    u = warm_start(problem) if u0 is None else np.asarray(u0, dtype=float)
    pad = 0.1

    for it in range(200):
        res = gauss_residual(mesh, u, problem.f)
        if res <= problem.tol:
            return GaussSolution(u=u, residual_norm=res, iterations=it,
                                 box_margin=_box_margin(u, lower))
        F = S @ u + m * _reaction(u, problem.f)
        J = (S + sp.diags(m * _reaction_slope(u, problem.f))).tocsc()
        step = spla.spsolve(J, -F)
        # Backtrack until the residual drops and u stays near the box.
        t = 1.0
        base = float(np.abs(F / m).max())
        for _ in range(60):
            cand = u + t * step
            if (cand.min() >= lower - pad and cand.max() <= pad
                    and gauss_residual(mesh, cand, problem.f) <= base):
                break
            t *= 0.5
        else:
            raise NonConvergence("gauss newton line search stalled")
        u = u + t * step

    raise NonConvergence(
        f"gauss newton did not reach tol {problem.tol} in 200 iterations "
        f"(last residual {res:.3e})")


def monotone_solve_gauss(problem, lam=4.0, max_iters=5000):
    """Monotone scheme from the supersolution u = 0: iterates nonincreasing.

    Solves (S + lam M) u+ = lam M u - M R(u) repeatedly.  Each sweep is a
    linear solve with a fixed SPD matrix (factorized once); lam >= sup R'
    on the box makes the update order-preserving, so the sequence decreases
    pointwise to the box solution.  Linear convergence degrades to
    sublinear when the data touch the double root f = 1/4.
    """
    mesh = problem.mesh
    S = operators.stiffness(mesh)
    m = operators.mass_vector(mesh)
    A = (S + sp.diags(lam * m)).tocsc()
    lu = spla.splu(A)
    u = np.zeros(mesh.num_vertices)
    for it in range(max_iters):
        res = gauss_residual(mesh, u, problem.f)
        if res <= problem.tol:
            return GaussSolution(u=u, residual_norm=res, iterations=it,
                                 box_margin=_box_margin(u, problem.box_lower),
                                 method="monotone")
        rhs = lam * m * u - m * _reaction(u, problem.f)
        u = lu.solve(rhs)
    raise NonConvergence(
        f"monotone gauss scheme did not reach tol {problem.tol} in "
        f"{max_iters} sweeps (last residual {res:.3e})")


def gauss_stability_probe(mesh, u, f, perturbation_scale=1e-6, seed=0):
    """Linearized stability at a solution plus a measured response ratio.

    Returns (min_eig, response) where min_eig is the smallest eigenvalue of
    the linearization S + M diag(R'(u)) in the M inner product (positive
    means the solution is strictly stable) and response is the measured
    ||du||_inf / ||df||_inf under a random admissible perturbation of f.
    """
    S = operators.stiffness(mesh)
    m = operators.mass_vector(mesh)
    A = (S + sp.diags(m * _reaction_slope(u, f))).toarray()
    import scipy.linalg as sla
    eigs = sla.eigh(A, np.diag(m), eigvals_only=True,
                    subset_by_index=[0, 0])
    min_eig = float(eigs[0])

    rng = np.random.default_rng(seed)
    df = perturbation_scale * rng.standard_normal(mesh.num_vertices)
    f2 = np.clip(f + df, 0.0, None)
    eta = 1.0
    bound = admissible_bound(eta)
    f2 = np.minimum(f2, bound)
    prob2 = GaussProblem(mesh=mesh, f=f2, eta=eta, tol=1e-12)
    sol2 = solve_gauss(prob2, u0=u)
    denom = float(np.abs(f2 - f).max())
    response = float(np.abs(sol2.u - u).max()) / denom if denom > 0 else 0.0
    return min_eig, response


def solution_to_csv(u):
    lines = ["vertex_index,u"]
    for i, v in enumerate(u):
        lines.append(f"{i},{float(v)!r}")
    return "\n".join(lines) + "\n"
