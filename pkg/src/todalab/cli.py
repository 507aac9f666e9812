"""Command-line front end: mesh building, synthesis, solves, verification.

Every subcommand writes outputs atomically and deterministically, so a
repeated invocation with identical inputs and seed produces byte-identical
files.  Exit codes: 0 success, 1 domain error (infeasible data, lost
admissibility, failed verification), 2 usage error.

A JSON config file can mirror any flag of a subcommand via --config; flags
given on the command line win over config values, which win over defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import fileio, operators
from .coupled import CoupledConfig, certify, solve_coupled
from .errors import TodaError
from .gauss import GaussProblem, monotone_solve_gauss, solve_gauss
from .mesh import CoverSpec, build_base_surface, build_cover, \
    mesh_from_json, mesh_to_json
from .ricci import RicciProblem, maximize_J, mt_probe
from .sections import (Divisor, SectionDensity, balanced_lift,
                       poincare_lelong_residual, synth_density)


def _read_mesh(path):
    with open(path) as handle:
        return mesh_from_json(handle.read())


def _write_mesh(path, mesh):
    fileio.atomic_write_text(path, mesh_to_json(mesh))


def _parse_divisor(text):
    entries = []
    for part in text.split(","):
        v_s, m_s = part.split(":")
        entries.append((int(v_s), int(m_s)))
    return Divisor(entries)


# ----------------------------------------------------------------------
# Subcommand implementations

def cmd_mesh(args):
    mesh = build_base_surface(refinement=args.refine)
    _write_mesh(args.output, mesh)
    print(f"wrote genus-{mesh.genus} mesh at refinement {args.refine}: "
          f"{mesh.num_vertices} vertices -> {args.output}")
    return 0


def cmd_cover(args):
    base = _read_mesh(args.mesh)
    spec = CoverSpec.cyclic(args.n)
    cover = build_cover(base, spec)
    _write_mesh(args.output, cover)
    print(f"wrote degree-{args.n} cyclic cover: genus {cover.genus}, "
          f"{cover.num_vertices} vertices -> {args.output}")
    return 0


def cmd_section(args):
    mesh = _read_mesh(args.mesh)
    if args.zero:
        density = SectionDensity.zero(mesh)
    elif args.balanced:
        if not (args.base_mesh and args.base_density
                and args.zero_vertex is not None):
            raise ValueError("--balanced needs --base-mesh, --base-density "
                             "and --zero-vertex")
        base_mesh = _read_mesh(args.base_mesh)
        base = fileio.read_density(args.base_density, base_mesh)
        density, report = balanced_lift(base, mesh, args.zero_vertex,
                                        normalization=args.normalization)
        print(f"balance ratio sup/mean = {report.ratio:.6g}")
    elif args.divisor:
        density = synth_density(mesh, _parse_divisor(args.divisor),
                                normalization=args.normalization)
    else:
        raise ValueError("need one of --divisor, --balanced, --zero")
    fileio.write_density(args.output, density)
    print(f"wrote degree-{density.degree} density -> {args.output}.csv/.json")
    return 0


def cmd_solve_gauss(args):
    mesh = _read_mesh(args.mesh)
    if args.data is not None:
        _, f = fileio.read_field_csv(args.data)
        if len(f) != mesh.num_vertices:
            raise TodaError("data field does not match the mesh")
    elif args.constant is not None:
        f = np.full(mesh.num_vertices, args.constant)
    else:
        raise ValueError("need --data or --constant")
    problem = GaussProblem(mesh=mesh, f=f, eta=args.eta, tol=args.tol)
    solver = monotone_solve_gauss if args.method == "monotone" \
        else solve_gauss
    solution = solver(problem)
    fileio.write_field_csv(args.output + "_u.csv", "u", solution.u)
    fileio.write_json(args.output + "_gauss.json",
                      solution.to_dict(problem))
    print(f"gauss solve: residual {solution.residual_norm:.3e} in "
          f"{solution.iterations} iterations -> {args.output}_u.csv")
    return 0


def cmd_solve_ricci(args):
    mesh = _read_mesh(args.mesh)
    density = fileio.read_density(args.density, mesh)
    if args.u is not None:
        _, u = fileio.read_field_csv(args.u)
    else:
        u = np.zeros(mesh.num_vertices)
    c_eff = args.scale * 2.0 * np.pi * args.degree / operators.volume(mesh)
    problem = RicciProblem(mesh=mesh, u=u, density=density, c=c_eff,
                           tol=args.tol)
    solution = maximize_J(problem)
    fileio.write_field_csv(args.output + "_v.csv", "v", solution.v)
    fileio.write_field_csv(args.output + "_w.csv", "w", solution.w)
    fileio.write_json(args.output + "_ricci.json",
                      solution.to_dict(problem))
    print(f"ricci solve: grad norm {solution.grad_norm:.3e}, "
          f"J = {solution.J_value:.6f} -> {args.output}_v.csv")
    return 0


def cmd_solve_coupled(args):
    mesh = _read_mesh(args.mesh)
    density = fileio.read_density(args.density, mesh)
    config = CoupledConfig(eta=args.eta, damping=args.theta,
                           max_outer_iters=args.max_outer,
                           tol_outer=args.tol_outer, degree=args.degree,
                           t=args.scale)
    result = solve_coupled(mesh, density, config)
    os.makedirs(args.output, exist_ok=True)
    out = lambda name: os.path.join(args.output, name)

    config_dict = {"eta": args.eta, "theta": args.theta,
                   "degree": args.degree, "scale": args.scale,
                   "max_outer": args.max_outer, "tol_outer": args.tol_outer}
    manifest = fileio.run_manifest(args.mesh, args.density, config_dict,
                                   args.seed)
    fileio.write_json(out("manifest.json"), manifest)
    fileio.write_field_csv(out("u.csv"), "u", result.u)
    fileio.write_field_csv(out("v.csv"), "v", result.v)
    fileio.write_json(out("certificate.json"),
                      result.certificate.to_dict())
    if args.vtk:
        _write_run_vtk(out("fields.vtk"), mesh, result.u, result.v, density)
    cert = result.certificate
    print(f"coupled solve: converged={cert.converged} in "
          f"{cert.outer_iters} outer iterations, sup_af = {cert.sup_af:.6g}"
          f" (t = {cert.t:.6g}) -> {args.output}/")
    return 0


def _write_run_vtk(path, mesh, u, v, density):
    ld = density.log_density
    af = np.exp(ld + 2.0 * v - 4.0 * u)
    fileio.write_vtk(path, mesh, [
        ("u", u), ("v", v), ("log_alpha2", ld), ("af_integrand", af)])


def _fail(message):
    print(f"verify: FAIL: {message}", file=sys.stderr)
    return 1


def cmd_verify(args):
    checked = []
    mesh = None
    if args.mesh:
        mesh = _read_mesh(args.mesh)
        mesh.validate()
        report = operators.spectral_gap(mesh, seed=args.seed)
        if report.lambda0 > 1e-8:
            return _fail(f"lambda0 = {report.lambda0:.3e} is not zero")
        checked.append(f"mesh {args.mesh}")

    if args.density:
        if mesh is None:
            raise ValueError("--density needs --mesh")
        density = fileio.read_density(args.density, mesh)
        if not density.is_zero:
            res = poincare_lelong_residual(density)
            if res > args.tol:
                return _fail(f"density curvature residual {res:.3e} "
                             f"exceeds {args.tol:.1e}")
        checked.append(f"density {args.density}")

    if args.run:
        manifest = fileio.read_json(os.path.join(args.run, "manifest.json"))
        mesh_path = args.mesh or manifest["mesh"]
        density_path = args.density or manifest["density"]
        run_mesh = _read_mesh(mesh_path)
        run_mesh.validate()
        for key, path in [("mesh", mesh_path)]:
            if key in manifest["hashes"]:
                if fileio.file_blob_sha1(path) != manifest["hashes"][key]:
                    return _fail(f"{key} file hash changed since the run")
        density = fileio.read_density(density_path, run_mesh)
        for key, path in [("density_csv", density_path + ".csv"),
                          ("density_json", density_path + ".json")]:
            if key in manifest["hashes"]:
                if fileio.file_blob_sha1(path) != manifest["hashes"][key]:
                    return _fail(f"{key} file hash changed since the run")
        _, u = fileio.read_field_csv(os.path.join(args.run, "u.csv"), "u")
        _, v = fileio.read_field_csv(os.path.join(args.run, "v.csv"), "v")
        cert_path = os.path.join(args.run, "certificate.json")
        with open(cert_path) as handle:
            stored_bytes = handle.read()
        stored = json.loads(stored_bytes)
        recomputed = certify(
            run_mesh, u, v, density, eta=stored["eta"],
            degree=stored["degree"], t=stored["t"],
            outer_iters=stored["outer_iters"], converged=stored["converged"])
        recomputed_bytes = fileio.dump_json(recomputed.to_dict())
        if recomputed_bytes != stored_bytes:
            return _fail("recomputed certificate differs from the stored one")
        if stored["converged"]:
            tol = 10 * 1e-8
            if (stored["gauss_residual"] > tol
                    or stored["ricci_residual"] > tol):
                return _fail("stored residuals are too large for a "
                             "converged run")
        checked.append(f"run {args.run}")

    if not checked:
        raise ValueError("nothing to verify: pass --mesh, --density, --run")
    print("verify: OK (" + "; ".join(checked) + ")")
    return 0


def cmd_export(args):
    mesh = _read_mesh(args.mesh)
    manifest = fileio.read_json(os.path.join(args.run, "manifest.json"))
    density = fileio.read_density(args.density or manifest["density"], mesh)
    _, u = fileio.read_field_csv(os.path.join(args.run, "u.csv"), "u")
    _, v = fileio.read_field_csv(os.path.join(args.run, "v.csv"), "v")
    _write_run_vtk(args.output, mesh, u, v, density)
    print(f"wrote VTK -> {args.output}")
    return 0


def cmd_probe(args):
    mesh = _read_mesh(args.mesh)
    report = operators.spectral_gap(mesh, seed=args.seed)
    mt = mt_probe(mesh, samples=args.samples, seed=args.seed)
    out = {"spectral": report.to_dict(), "mt_constant": mt,
           "samples": args.samples, "seed": args.seed}
    if args.output:
        fileio.write_json(args.output, out)
        print(f"wrote probe report -> {args.output}")
    else:
        print(fileio.dump_json(out), end="")
    return 0


# ----------------------------------------------------------------------
# Parser

def _add_common(parser):
    parser.add_argument("--config", help="JSON file mirroring the flags "
                        "(command-line flags win)")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for all randomized diagnostics")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="toda",
        description="Curvature-system laboratory on hyperbolic surface "
                    "meshes: build meshes and covers, synthesize section "
                    "densities, run the scalar/bundle/coupled solvers, and "
                    "verify certificates from files.")
    parser._toda_subparsers = []
    sub = parser.add_subparsers(dest="command", required=True)
    add_parser = sub.add_parser

    def tracked_add_parser(*args, **kwargs):
        p = add_parser(*args, **kwargs)
        parser._toda_subparsers.append(p)
        return p

    sub.add_parser = tracked_add_parser

    p = sub.add_parser("mesh", help="build the genus-2 base mesh")
    p.add_argument("--genus2", action="store_true",
                   help="regular-octagon genus-2 base (the only base)")
    p.add_argument("--refine", type=int, default=0,
                   help="number of refinement levels")
    p.add_argument("-o", "--output", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("cover", help="build a cyclic cover of a mesh")
    p.add_argument("--mesh", required=True)
    p.add_argument("--n", type=int, required=True, help="cover degree")
    p.add_argument("-o", "--output", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_cover)

    p = sub.add_parser("section", help="synthesize a section density")
    p.add_argument("--mesh", required=True)
    p.add_argument("--divisor", help='zeros as "vertex:mult,vertex:mult"')
    p.add_argument("--zero", action="store_true",
                   help="the identically-zero section")
    p.add_argument("--balanced", action="store_true",
                   help="lift a base density and add one fresh zero")
    p.add_argument("--base-mesh", help="base mesh for --balanced")
    p.add_argument("--base-density", help="base density prefix for "
                   "--balanced")
    p.add_argument("--zero-vertex", type=int,
                   help="fresh zero vertex for --balanced")
    p.add_argument("--normalization", default="unit_mean",
                   choices=["unit_mean", "unit_sup"])
    p.add_argument("-o", "--output", required=True,
                   help="output prefix (.csv and .json are appended)")
    _add_common(p)
    p.set_defaults(func=cmd_section)

    p = sub.add_parser("solve-gauss", help="solve the scalar curvature "
                       "equation")
    p.add_argument("--mesh", required=True)
    p.add_argument("--data", help="field CSV with the data f")
    p.add_argument("--constant", type=float, help="constant data value")
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--method", default="newton",
                   choices=["newton", "monotone"])
    p.add_argument("-o", "--output", required=True, help="output prefix")
    _add_common(p)
    p.set_defaults(func=cmd_solve_gauss)

    p = sub.add_parser("solve-ricci", help="solve the bundle curvature "
                       "equation")
    p.add_argument("--mesh", required=True)
    p.add_argument("--density", required=True, help="density file prefix")
    p.add_argument("--u", help="field CSV with the background u (default 0)")
    p.add_argument("--degree", type=int, default=1,
                   help="normal-bundle degree wired as c = 2 pi d / Vol")
    p.add_argument("--scale", type=float, default=1.0,
                   help="curvature rescaling knob t in (0, 1]")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("-o", "--output", required=True, help="output prefix")
    _add_common(p)
    p.set_defaults(func=cmd_solve_ricci)

    p = sub.add_parser("solve-coupled", help="run the coupled fixed-point "
                       "driver")
    p.add_argument("--mesh", required=True)
    p.add_argument("--density", required=True, help="density file prefix")
    p.add_argument("--eta", type=float, default=0.5)
    p.add_argument("--theta", type=float, default=1.0, help="damping")
    p.add_argument("--degree", type=int, default=1)
    p.add_argument("--scale", type=float, default=None,
                   help="curvature rescaling knob t (default: automatic)")
    p.add_argument("--max-outer", type=int, default=100)
    p.add_argument("--tol-outer", type=float, default=1e-8)
    p.add_argument("--vtk", action="store_true",
                   help="also write fields.vtk into the run directory")
    p.add_argument("-o", "--output", required=True, help="run directory")
    _add_common(p)
    p.set_defaults(func=cmd_solve_coupled)

    p = sub.add_parser("verify", help="re-check invariants from files")
    p.add_argument("--mesh")
    p.add_argument("--density", help="density file prefix")
    p.add_argument("--run", help="run directory with a certificate")
    p.add_argument("--tol", type=float, default=1e-8)
    _add_common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export", help="export run fields to VTK")
    p.add_argument("--mesh", required=True)
    p.add_argument("--run", required=True)
    p.add_argument("--density", help="density prefix override")
    p.add_argument("-o", "--output", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("probe", help="spectral and functional diagnostics")
    p.add_argument("--mesh", required=True)
    p.add_argument("--samples", type=int, default=8)
    p.add_argument("-o", "--output")
    _add_common(p)
    p.set_defaults(func=cmd_probe)

    return parser


def _load_config(argv):
    """Pre-scan for --config so its values become parser defaults."""
    for i, arg in enumerate(argv):
        if arg == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
            break
        if arg.startswith("--config="):
            path = arg.split("=", 1)[1]
            break
    else:
        return {}
    with open(path) as handle:
        config = json.load(handle)
    if not isinstance(config, dict):
        raise TodaError(f"config file {path} must hold a JSON object")
    return {key.replace("-", "_"): value for key, value in config.items()}


def _apply_config(parser, config):
    """Turn config values into per-subcommand defaults (flags still win)."""
    for p in parser._toda_subparsers:
        known = {action.dest: action for action in p._actions}
        overlap = {k: v for k, v in config.items() if k in known}
        p.set_defaults(**overlap)
        for key in overlap:
            known[key].required = False


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        config = _load_config(argv)
        parser = build_parser()
        if config:
            _apply_config(parser, config)
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return int(exc.code) if exc.code else 0
        return args.func(args)
    except TodaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
