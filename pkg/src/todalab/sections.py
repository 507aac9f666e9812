"""Section densities: discrete |alpha|^2 fields with prescribed zeros.

A density models the pointwise squared norm of a holomorphic section of a
degree-d line bundle whose metric has curvature (2 pi d / Vol) * area form.
It is synthesized from discrete Green functions so that the distributional
curvature identity

    L log|alpha|^2 = 4 pi sum_j m_j delta_{z_j} - 2 c_L M 1,
    c_L = 2 pi deg / Vol

holds exactly up to linear-solver roundoff (both sides have zero total
mass because c_L uses the discrete volume).  Zeros are regularized at mesh
scale: the discrete delta keeps log|alpha|^2 finite at divisor vertices,
and pointwise checks exclude a one-ring around them.

Balanced families arise by pulling a base density back through a cover and
multiplying by a degree-1 factor with a single fresh zero; the balance
ratio sup/mean of the family stays bounded in the cover degree.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import logsumexp

from . import operators
from .errors import TodaError


@dataclass
class Divisor:
    """Formal nonnegative vertex combination: entries (vertex, multiplicity)."""

    entries: list

    def __post_init__(self):
        vs = [v for v, _ in self.entries]
        if len(set(vs)) != len(vs):
            raise ValueError("divisor vertices must be distinct")
        if any(m < 1 for _, m in self.entries):
            raise ValueError("divisor multiplicities must be >= 1")

    @property
    def degree(self):
        return int(sum(m for _, m in self.entries))

    def indicator(self, num_vertices):
        ind = np.zeros(num_vertices)
        for v, m in self.entries:
            ind[v] += m
        return ind


@dataclass
class SectionDensity:
    """Per-vertex log density log|alpha|^2 with its divisor bookkeeping."""

    mesh: object
    log_density: np.ndarray
    divisor: Divisor
    curvature_constant: float
    normalization: str

    @classmethod
    def zero(cls, mesh):
        """The identically-zero section (log density -inf everywhere)."""
        ld = np.full(mesh.num_vertices, -np.inf)
        return cls(mesh=mesh, log_density=ld, divisor=Divisor([]),
                   curvature_constant=0.0, normalization="unit_mean")

    @property
    def degree(self):
        return self.divisor.degree

    @property
    def is_zero(self):
        return bool(np.all(np.isneginf(self.log_density)))

    def density(self):
        return np.exp(self.log_density)

    def mean(self):
        m = operators.mass_vector(self.mesh)
        return float(np.exp(logsumexp(self.log_density, b=m)
                            - np.log(m.sum())))

    def sup(self):
        return float(np.exp(self.log_density.max()))

    def one_ring(self):
        """Divisor vertices together with their edge-graph neighbors."""
        mask = np.zeros(self.mesh.num_vertices, dtype=bool)
        for v, _ in self.divisor.entries:
            mask[v] = True
            for e in range(self.mesh.num_edges):
                t, h = self.mesh.edges[e]
                if t == v:
                    mask[h] = True
                if h == v:
                    mask[t] = True
        return mask


@dataclass
class BalanceReport:
    sup_density: float
    mean_density: float
    ratio: float
    genus: int
    degree: int

    def to_dict(self):
        return {"sup_density": self.sup_density,
                "mean_density": self.mean_density, "ratio": self.ratio,
                "genus": self.genus, "degree": self.degree}


def balance_report(density):
    sup = density.sup()
    mean = density.mean()
    return BalanceReport(sup_density=sup, mean_density=mean,
                         ratio=sup / mean, genus=density.mesh.genus,
                         degree=density.degree)


# ----------------------------------------------------------------------
# Green functions

def _green_solver(mesh):
    """Cached LU factorization of the bordered zero-mean Poisson system."""
    key = "green_lu"
    if key not in mesh._cache:
        S = operators.stiffness(mesh)
        m = operators.mass_vector(mesh)
        V = S.shape[0]
        m_col = sp.csr_matrix(m.reshape(V, 1))
        kkt = sp.bmat([[S, m_col], [m_col.T, None]], format="csc")
        mesh._cache[key] = spla.splu(kkt)
    return mesh._cache[key]


def poisson_zero_mean(mesh, rhs_measure):
    """Solve L u = rhs (a measure with zero total mass) with M-mean-zero u."""
    m = operators.mass_vector(mesh)
    V = mesh.num_vertices
    lu = _green_solver(mesh)
    # L = -S, so S u = -rhs
    full = np.concatenate([-np.asarray(rhs_measure, float), [0.0]])
    sol = lu.solve(full)
    u = sol[:V]
    return u


def green_function(mesh, z):
    """Zero-mean G with L G = delta_z - M 1 / Vol (as measures)."""
    m = operators.mass_vector(mesh)
    vol = m.sum()
    rhs = -(m / vol)
    rhs[z] += 1.0
    return poisson_zero_mean(mesh, rhs)


# ----------------------------------------------------------------------
# Synthesis

def synth_density(mesh, divisor, normalization="unit_mean"):
    """Density with the given zeros: log|alpha|^2 = 4 pi sum m_j G_zj + kappa."""
    if normalization not in ("unit_mean", "unit_sup"):
        raise ValueError(f"unknown normalization {normalization!r}")
    m = operators.mass_vector(mesh)
    vol = m.sum()
    ld = np.zeros(mesh.num_vertices)
    for v, mult in divisor.entries:
        ld += 4.0 * np.pi * mult * green_function(mesh, v)
    ld += _normalization_constant(ld, m, normalization)
    c_L = 2.0 * np.pi * divisor.degree / vol
    return SectionDensity(mesh=mesh, log_density=ld, divisor=divisor,
                          curvature_constant=float(c_L),
                          normalization=normalization)


def _normalization_constant(ld, m, normalization):
    if normalization == "unit_mean":
        return -(logsumexp(ld, b=m) - np.log(m.sum()))
    return -ld.max()


def poincare_lelong_residual(density):
    """Max-abs defect of L log|alpha|^2 = 4 pi (divisor) - 2 c_L M 1."""
    mesh = density.mesh
    L, _ = operators.laplacian(mesh)
    m = operators.mass_vector(mesh)
    lhs = L @ density.log_density
    rhs = (4.0 * np.pi * density.divisor.indicator(mesh.num_vertices)
           - 2.0 * density.curvature_constant * m)
    return float(np.abs(lhs - rhs).max())


# ----------------------------------------------------------------------
# Lifts and balanced families

def lift_density(base, cover_mesh, cover_map=None):
    """Pull a base density back through a covering map."""
    if cover_map is None:
        cover_map = cover_mesh.base_vertex
    if cover_map is None:
        raise TodaError("cover mesh carries no covering map; pass cover_map")
    cover_map = np.asarray(cover_map)
    if cover_map.shape != (cover_mesh.num_vertices,):
        raise TodaError("covering map has the wrong size for the cover mesh")
    if len(cover_map) % base.mesh.num_vertices != 0:
        raise TodaError("cover/base vertex counts are incompatible")
    n = len(cover_map) // base.mesh.num_vertices

    ld = base.log_density[cover_map]
    entries = []
    base_div = {v: mult for v, mult in base.divisor.entries}
    for i in range(cover_mesh.num_vertices):
        mult = base_div.get(int(cover_map[i]))
        if mult:
            entries.append((i, mult))
    divisor = Divisor(entries)
    m = operators.mass_vector(cover_mesh)
    c_L = 2.0 * np.pi * divisor.degree / m.sum()
    return SectionDensity(mesh=cover_mesh, log_density=ld, divisor=divisor,
                          curvature_constant=float(c_L),
                          normalization=base.normalization)


def balanced_lift(base, cover_mesh, z_n, normalization="unit_mean"):
    """Lift o multiply: lift the base density and add one fresh simple zero.

    The base degree must be 4*g_base - 4 (the canonical-square degree), so
    the result has degree n*(4g-4) + 1 on the degree-n cover.  Returns the
    density together with its balance report.
    """
    expected = 4 * base.mesh.genus - 4
    if base.degree != expected:
        raise ValueError(
            f"balanced lift needs base degree {expected}, got {base.degree}")
    lifted = lift_density(base, cover_mesh)
    extra = synth_density(cover_mesh, Divisor([(int(z_n), 1)]),
                          normalization="unit_mean")
    ld = lifted.log_density + extra.log_density
    m = operators.mass_vector(cover_mesh)
    ld += _normalization_constant(ld, m, normalization)
    entries = {v: mult for v, mult in lifted.divisor.entries}
    entries[int(z_n)] = entries.get(int(z_n), 0) + 1
    divisor = Divisor(sorted(entries.items()))
    c_L = 2.0 * np.pi * divisor.degree / m.sum()
    density = SectionDensity(mesh=cover_mesh, log_density=ld, divisor=divisor,
                             curvature_constant=float(c_L),
                             normalization=normalization)
    return density, balance_report(density)


# ----------------------------------------------------------------------
# Diagnostics

def oscillation_report(density, radius):
    """Renormalized oscillation constants of a degree-1 density.

    Chooses lambda with (sup lam rho)(inf lam rho) = 1 outside the
    graph-metric ball B(z0, radius) and returns
    (C_out, C_in) = (sqrt(sup_out/inf_out), sup_inside lam rho).
    """
    if density.divisor.degree != 1 or len(density.divisor.entries) != 1:
        raise ValueError("oscillation report needs a degree-1 divisor")
    sys = operators.systole(density.mesh)
    if radius >= sys / 2.0:
        raise ValueError(
            f"radius {radius} must be below half the systole {sys / 2.0}")
    z0 = density.divisor.entries[0][0]
    dist = operators.graph_distances(density.mesh, z0)
    inside = dist <= radius
    outside = ~inside
    if not outside.any() or not inside.any():
        raise ValueError("ball boundary is empty at this radius")
    rho = density.density()
    sup_out = float(rho[outside].max())
    inf_out = float(rho[outside].min())
    lam = 1.0 / np.sqrt(sup_out * inf_out)
    c_out = float(np.sqrt(sup_out / inf_out))
    c_in = float(lam * rho[inside].max())
    return c_out, c_in


def schwarz_constant(delta):
    """C(delta) = (cosh(delta/2) / tanh(delta/2))^2."""
    return float((np.cosh(delta / 2.0) / np.tanh(delta / 2.0)) ** 2)


def schwarz_check(density, radius):
    """Vertexwise decay bound near the zero of a degree-1 density.

    Inside the graph ball D = B(z0, radius), excluding the one-ring of z0,
    checks  lam rho(z) <= C(delta) tanh^2(r(z)/2) sup_{boundary of D} lam rho
    with delta the systole and lam the oscillation normalization.  The
    multiplicative margin uses graph distances (which overestimate
    hyperbolic ones, loosening the bound only in the safe direction).
    Returns a report dict; "ok" is True when every checked vertex passes.
    """
    mesh = density.mesh
    z0 = density.divisor.entries[0][0]
    dist = operators.graph_distances(mesh, z0)
    inside = dist <= radius
    outside = ~inside
    if not outside.any():
        raise ValueError("ball covers the whole mesh")
    rho = density.density()
    sup_out = float(rho[outside].max())
    inf_out = float(rho[outside].min())
    lam = 1.0 / np.sqrt(sup_out * inf_out)

    boundary = inside.copy()
    interior_flags = np.zeros(mesh.num_vertices, dtype=bool)
    for e in range(mesh.num_edges):
        t, h = mesh.edges[e]
        if inside[t] and not inside[h]:
            interior_flags[t] = True
        if inside[h] and not inside[t]:
            interior_flags[h] = True
    boundary &= interior_flags
    if not boundary.any():
        raise ValueError("ball boundary is empty at this radius")

    delta = operators.systole(mesh)
    c_delta = schwarz_constant(delta)
    sup_boundary = float((lam * rho[boundary]).max())

    checked = inside & ~density.one_ring()
    lhs = lam * rho[checked]
    rhs = c_delta * np.tanh(dist[checked] / 2.0) ** 2 * sup_boundary
    margin = rhs - lhs
    return {
        "ok": bool((margin >= 0).all()) if checked.any() else True,
        "checked": int(checked.sum()),
        "worst_margin": float(margin.min()) if checked.any() else np.inf,
        "c_delta": c_delta,
        "sup_boundary": sup_boundary,
        "systole": delta,
    }


def radial_barrier(r, a, B):
    """Barrier h(r) = -2a ln cosh(r/2) + B + ln tanh(r/2), r > 0.

    With a = 1/(2 sinh^2(delta/2)) = 2 pi / Vol(D(delta)) the derivative
    vanishes at r = delta, and h satisfies h'' + coth(r) h' = -a for all r.
    """
    r = np.asarray(r, dtype=float)
    if (r <= 0).any():
        raise ValueError("radial barrier needs r > 0")
    return -2.0 * a * np.log(np.cosh(r / 2.0)) + B + np.log(np.tanh(r / 2.0))


def radial_barrier_derivative(r, a):
    """d/dr of the radial barrier: -a tanh(r/2) + 1/sinh(r)."""
    r = np.asarray(r, dtype=float)
    if (r <= 0).any():
        raise ValueError("radial barrier needs r > 0")
    return -a * np.tanh(r / 2.0) + 1.0 / np.sinh(r)


def disk_indicator(mesh, z0, radius):
    """Vertices within graph-geodesic distance radius of z0."""
    return operators.graph_distances(mesh, z0) <= radius


def disk_balanced_potential(mesh, z0, radius, c):
    """Zero-mean g with L g = c M 1 - a M 1_D, a = c Vol / Vol(D).

    The balancing constant a makes the right-hand side a zero-mass measure,
    so the solve is exact; this realizes the bounded comparison potential
    used for pointwise density control.
    """
    m = operators.mass_vector(mesh)
    vol = m.sum()
    ind = disk_indicator(mesh, z0, radius).astype(float)
    vol_d = float((m * ind).sum())
    if vol_d == 0:
        raise ValueError("disk contains no vertices")
    a = c * vol / vol_d
    rhs = c * m - a * m * ind
    return poisson_zero_mean(mesh, rhs), float(a)


# ----------------------------------------------------------------------
# Serialization

def density_to_csv(density):
    lines = ["vertex_index,log_density"]
    for i, v in enumerate(density.log_density):
        lines.append(f"{i},{v!r}")
    return "\n".join(lines) + "\n"


def density_sidecar_dict(density):
    return {
        "degree": density.degree,
        "c_L": density.curvature_constant,
        "normalization": density.normalization,
        "divisor": [[int(v), int(m)] for v, m in density.divisor.entries],
    }


def density_from_files(mesh, csv_text, sidecar):
    rows = csv_text.strip().splitlines()
    if rows[0].strip() != "vertex_index,log_density":
        raise TodaError("bad density CSV header")
    ld = np.empty(mesh.num_vertices)
    seen = np.zeros(mesh.num_vertices, dtype=bool)
    for row in rows[1:]:
        idx_s, val_s = row.split(",")
        ld[int(idx_s)] = float(val_s)
        seen[int(idx_s)] = True
    if not seen.all():
        raise TodaError("density CSV does not cover every vertex")
    divisor = Divisor([(int(v), int(m)) for v, m in sidecar["divisor"]])
    if divisor.degree != int(sidecar["degree"]):
        raise TodaError("divisor degree disagrees with sidecar degree")
    return SectionDensity(mesh=mesh, log_density=ld, divisor=divisor,
                          curvature_constant=float(sidecar["c_L"]),
                          normalization=sidecar["normalization"])


def density_sidecar_json(density):
    return json.dumps(density_sidecar_dict(density), indent=1, sort_keys=True)
