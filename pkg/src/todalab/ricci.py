"""Prescribed-curvature equation for the bundle metric factor v.

Given a background factor u and a section density rho = |alpha|^2 with
curvature constant c, the unknown v solves

    Delta v = c - e^{-2u} e^{2v} rho.

Integrating against the area form forces the mean identity
avg(e^{-2u} e^{2v} rho) = c, which is impossible when rho vanishes
identically but c > 0 (the integral obstruction).

Two routes are provided and cross-checked:

* a concave-maximization route: with w = v - const chosen to have zero
  M-mean, maximize
      J(w) = ln avg(F e^{2w}) - (1/(c Vol)) w^T S w,   F = e^{log rho - 2u},
  whose critical points translate back to solutions of the equation with
  the mean identity holding exactly by construction;
* a direct damped Newton iteration on the equation residual, used for
  warm-started re-solves inside outer loops.

The stability check locates the spectrum of the linearized operator
L + 2 M diag(e^{2v} f) relative to M: it lies in
(-inf, -lambda_1 + 2 sup e^{2v} f] union [2c, 2 sup e^{2v} f], leaving the
window (-lambda_1 + 2 sup e^{2v} f, 2c) free of eigenvalues whenever
2 sup e^{2v} f < lambda_1; the inverse of the linearization is then
bounded by max(1/(lambda_1 - 2 sup e^{2v} f), 1/c).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import logsumexp

from . import operators
from .errors import InfeasibleDegree, NonConvergence, UnboundedDetected


@dataclass
class RicciProblem:
    mesh: object
    u: np.ndarray
    density: object
    c: float = None
    tol: float = 1e-9

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        if self.u.shape != (self.mesh.num_vertices,):
            raise ValueError("u must be a per-vertex array")
        if self.c is None:
            self.c = self.density.curvature_constant
        self.c = float(self.c)
        if self.density.is_zero and self.c > 0:
            raise InfeasibleDegree(
                "the section density vanishes identically while c > 0: "
                "integrating the curvature equation over the closed surface "
                "forces avg(e^{-2u} e^{2v} rho) = c, which fails for rho = 0")
        if self.c < 0:
            raise ValueError("curvature constant c must be nonnegative")

    def log_weight(self):
        """log F = log rho - 2u, the weight in front of e^{2v}."""
        return self.density.log_density - 2.0 * self.u


@dataclass
class RicciSolution:
    v: np.ndarray
    w: np.ndarray
    J_value: float
    grad_norm: float
    mean_constraint_residual: float
    iterations: int = 0
    method: str = "variational"
    v_shift_from_init: float = 0.0

    def to_dict(self, problem):
        return {"J_value": self.J_value,
                "grad_norm": self.grad_norm,
                "mean_residual": self.mean_constraint_residual,
                "c": problem.c,
                "degree": problem.density.degree}


@dataclass
class StabilityReport:
    sup_term: float
    lambda1: float
    window: tuple
    violating: list
    c: float
    hypothesis_ok: bool
    hinv_norm: float
    hinv_bound: float

    @property
    def window_empty(self):
        return len(self.violating) == 0

    def to_dict(self):
        return {"sup_term": self.sup_term, "lambda1": self.lambda1,
                "window": list(self.window), "violating": self.violating,
                "c": self.c, "hypothesis_ok": self.hypothesis_ok,
                "hinv_norm": self.hinv_norm, "hinv_bound": self.hinv_bound,
                "window_empty": self.window_empty}


def _check_problem_nonzero(problem):
    if problem.density.is_zero:
        raise InfeasibleDegree(
            "the variational functional is undefined for the zero section")


def _check_zero_mean(problem, w):
    m = operators.mass_vector(problem.mesh)
    mean = float(m @ w) / m.sum()
    if abs(mean) > 1e-8 * max(1.0, float(np.abs(w).max())):
        raise ValueError("w must have zero M-mean")


def eval_J(problem, w):
    """J(w) = ln avg(F e^{2w}) - (1/(c Vol)) w^T S w on zero-M-mean w."""
    _check_problem_nonzero(problem)
    _check_zero_mean(problem, w)
    m = operators.mass_vector(problem.mesh)
    S = operators.stiffness(problem.mesh)
    vol = m.sum()
    loga = problem.log_weight() + 2.0 * w
    log_avg = logsumexp(loga, b=m) - np.log(vol)
    dirichlet = float(w @ (S @ w))
    return float(log_avg - dirichlet / (problem.c * vol))


def grad_J(problem, w):
    """Zero-M-mean projection of the M-gradient of J at w."""
    _check_problem_nonzero(problem)
    m = operators.mass_vector(problem.mesh)
    S = operators.stiffness(problem.mesh)
    vol = m.sum()
    loga = problem.log_weight() + 2.0 * w
    log_total = logsumexp(loga, b=m)
    g = (2.0 * np.exp(loga - log_total)
         - (2.0 / (problem.c * vol)) * (S @ w) / m)
    # The M-mean of g is exactly 2/Vol (the first term integrates to 2,
    # the stiffness term to 0), so project by that constant.
    return g - 2.0 / vol


def _softmax_weights(problem, w):
    m = operators.mass_vector(problem.mesh)
    loga = problem.log_weight() + 2.0 * w + np.log(m)
    return np.exp(loga - logsumexp(loga))


def translate_v(problem, w):
    """Recover v from a critical w: v = w + (ln c - ln avg(F e^{2w})) / 2."""
    m = operators.mass_vector(problem.mesh)
    vol = m.sum()
    loga = problem.log_weight() + 2.0 * w
    log_avg = logsumexp(loga, b=m) - np.log(vol)
    return w + 0.5 * (np.log(problem.c) - log_avg)


def mean_constraint_residual(problem, v):
    """|avg(e^{-2u} e^{2v} rho) - c|."""
    m = operators.mass_vector(problem.mesh)
    vol = m.sum()
    log_int = logsumexp(problem.log_weight() + 2.0 * v, b=m)
    return float(abs(np.exp(log_int - np.log(vol)) - problem.c))


def equation_residual(problem, v):
    """Max-abs defect of L v = M (c - e^{-2u} e^{2v} rho) against M."""
    L, _ = operators.laplacian(problem.mesh)
    m = operators.mass_vector(problem.mesh)
    forcing = problem.c - np.exp(problem.log_weight() + 2.0 * v)
    return float(np.abs((L @ v) / m - forcing).max())


def _finish_solution(problem, w, iterations, method, v_shift=0.0):
    v = translate_v(problem, w)
    g = grad_J(problem, w)
    return RicciSolution(
        v=v, w=w, J_value=eval_J(problem, w),
        grad_norm=float(np.abs(g).max()),
        mean_constraint_residual=mean_constraint_residual(problem, v),
        iterations=iterations, method=method, v_shift_from_init=v_shift)


def maximize_J(problem, w0=None, max_iters=10000):
    """Ascend J from w = 0 by Newton steps with a gradient fallback.

    The Hessian 4(diag(p) - p p^T) - (2/(c Vol)) S is sparse plus a rank-1
    correction, handled by a bordered factorization (enforcing the
    zero-M-mean constraint) and a Sherman-Morrison update.  Steps that are
    not ascent directions fall back to a preconditioned gradient; Armijo
    backtracking guarantees monotone increase, so the maximum value is
    never below J(0).
    """
    _check_problem_nonzero(problem)
    mesh = problem.mesh
    m = operators.mass_vector(mesh)
    S = operators.stiffness(mesh)
    vol = m.sum()
    V = mesh.num_vertices
    scale = 2.0 / (problem.c * vol)

    w = np.zeros(V) if w0 is None else np.asarray(w0, dtype=float)
    J0 = eval_J(problem, np.zeros(V))
    J = eval_J(problem, w)
    m_col = sp.csr_matrix(m.reshape(V, 1))
    precond = spla.splu((scale * S + (2.0 / vol) * sp.diags(m)).tocsc())

    for it in range(max_iters):
        g = grad_J(problem, w)
        gnorm = float(np.abs(g).max())
        if gnorm <= problem.tol:
            return _finish_solution(problem, w, it, "variational")
        if J - J0 > 1e3 and float(w @ (S @ w)) > 1e3 * problem.c * vol:
            raise UnboundedDetected(
                "J grows without bound along the ascent; the functional has "
                "no maximizer for this data")

        grad_euc = m * g  # Euclidean gradient of J (projected)
        p = _softmax_weights(problem, w)
        step = None
        try:
            D = (sp.diags(4.0 * p) - scale * S).tocsc()
            kkt = sp.bmat([[D, m_col], [m_col.T, None]], format="csc")
            lu = spla.splu(kkt)
            b = np.concatenate([-grad_euc, [0.0]])
            x0 = lu.solve(b)
            up = np.concatenate([-4.0 * p, [0.0]])
            y = lu.solve(up)
            vp = np.concatenate([p, [0.0]])
            denom = 1.0 + vp @ y
            if abs(denom) > 1e-14:
                sol = x0 - y * ((vp @ x0) / denom)
                cand = sol[:V]
                cand -= (m @ cand) / vol
                if np.isfinite(cand).all() and grad_euc @ cand > 0:
                    step = cand
        except Exception:
            step = None
        if step is None:
            step = precond.solve(grad_euc)
            step -= (m @ step) / vol

        slope = float(grad_euc @ step)
        t = 1.0
        accepted = False
        for _ in range(60):
            J_new = eval_J(problem, w + t * step)
            if J_new >= J + 1e-4 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            raise NonConvergence("J line search stalled")
        w = w + t * step
        J = J_new

    raise NonConvergence(
        f"J maximization did not reach tol {problem.tol} in {max_iters} "
        f"iterations (last grad norm {gnorm:.3e})")


def solve_ricci_newton(problem, v_init, max_iters=200):
    """Damped Newton on G(v) = -S v - M c + M F e^{2v} from a given seed.

    The Jacobian -S + 2 M diag(F e^{2v}) is factorized sparsely each step;
    backtracking controls the residual.  Converges in a couple of steps
    when seeded near a solution (e.g. at the variational maximizer) but,
    unlike the variational route, carries no global selection principle:
    the report records the distance from the seed.
    """
    _check_problem_nonzero(problem)
    mesh = problem.mesh
    m = operators.mass_vector(mesh)
    S = operators.stiffness(mesh)
    v = np.asarray(v_init, dtype=float).copy()
    logF = problem.log_weight()

    for it in range(max_iters):
        res = equation_residual(problem, v)
        if res <= problem.tol:
            break
        Fe = np.exp(logF + 2.0 * v)
        G = -(S @ v) - m * problem.c + m * Fe
        Jmat = (-S + sp.diags(2.0 * m * Fe)).tocsc()
        try:
            step = spla.splu(Jmat).solve(-G)
        except RuntimeError as exc:
            raise NonConvergence(f"ricci newton jacobian is singular: {exc}")
        t = 1.0
        base = res
        for _ in range(60):
            cand = v + t * step
            if equation_residual(problem, cand) <= base:
                break
            t *= 0.5
        else:
            raise NonConvergence("ricci newton line search stalled")
        v = v + t * step
    else:
        raise NonConvergence(
            f"ricci newton did not reach tol {problem.tol} in {max_iters} "
            f"iterations (last residual {res:.3e})")

    vol = m.sum()
    w = v - (m @ v) / vol
    sol = _finish_solution(
        problem, w, it, "newton",
        v_shift=float(np.abs(v - np.asarray(v_init, float)).max()))
    # Keep the Newton v itself (translate_v would re-center the mean
    # identity; for a converged Newton iterate they agree to solver tol).
    sol.v = v
    sol.mean_constraint_residual = mean_constraint_residual(problem, v)
    return sol


# ----------------------------------------------------------------------
# Stability of the linearized operator

def stability_check(mesh, v, f):
    """Locate the spectrum of L + 2 M diag(e^{2v} f) relative to M.

    f is the effective weight e^{-2u} rho.  With c recovered from the mean
    identity c = avg(e^{2v} f), every eigenvalue lies in
    (-inf, -lambda_1 + 2 sup e^{2v} f] union [2c, 2 sup e^{2v} f]; the
    report lists any eigenvalue violating the open window in between and
    the resulting bound on the inverse of the linearization.
    """
    m = operators.mass_vector(mesh)
    S = operators.stiffness(mesh)
    vol = m.sum()
    weight = np.exp(2.0 * v) * f
    sup_term = 2.0 * float(weight.max())
    c = float((m * weight).sum() / vol)

    A = -S.toarray() + 2.0 * np.diag(m * weight)
    eigs = sla.eigh(A, np.diag(m), eigvals_only=True)
    lam1 = operators.spectral_gap(mesh).lambda1

    lo = -lam1 + sup_term
    hi = 2.0 * c
    window = (lo, hi)
    pad = 1e-9 * max(1.0, abs(lo), abs(hi))
    violating = [float(x) for x in eigs if lo + pad < x < hi - pad]

    hypothesis_ok = sup_term < lam1
    hinv = float(1.0 / np.abs(eigs).min()) if np.abs(eigs).min() > 0 else np.inf
    if hypothesis_ok and c > 0:
        bound = max(1.0 / (lam1 - sup_term), 1.0 / c)
    else:
        bound = np.inf
    return StabilityReport(sup_term=sup_term, lambda1=lam1, window=window,
                           violating=violating, c=c,
                           hypothesis_ok=hypothesis_ok, hinv_norm=hinv,
                           hinv_bound=float(bound))


def mt_probe(mesh, samples=8, seed=0):
    """Sample the Moser-Trudinger-type integral on smoothed random fields.

    Draws z ~ N(0, I), smooths by one screened solve (S + M) y = M z,
    removes the M-mean, normalizes to unit Dirichlet energy, and reports
    the largest value of sum(M (e^{4 pi y^2} - 1)) over the samples.
    """
    rng = np.random.default_rng(seed)
    m = operators.mass_vector(mesh)
    S = operators.stiffness(mesh)
    vol = m.sum()
    lu = spla.splu((S + sp.diags(m)).tocsc())
    worst = 0.0
    for _ in range(samples):
        z = rng.standard_normal(mesh.num_vertices)
        y = lu.solve(m * z)
        y -= (m @ y) / vol
        en = float(y @ (S @ y))
        if en <= 0:
            continue
        y /= np.sqrt(en)
        val = float((m * np.expm1(4.0 * np.pi * y ** 2)).sum())
        worst = max(worst, val)
    return worst


# ----------------------------------------------------------------------
# Serialization

def field_to_csv(name, values):
    lines = [f"vertex_index,{name}"]
    for i, val in enumerate(values):
        lines.append(f"{i},{float(val)!r}")
    return "\n".join(lines) + "\n"
