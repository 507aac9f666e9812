"""File formats and atomic output helpers.

All writers go through an atomic temp-file + rename so a crashed run never
leaves a half-written artifact, and all serialization is deterministic
(sorted JSON keys, shortest round-trip float repr) so identical inputs and
seed produce byte-identical outputs.

Formats:
  * mesh JSON         -- geometry module dict (see mesh.mesh_to_json)
  * field CSV         -- header ``vertex_index,<name>``, one row per vertex
  * density CSV+JSON  -- log-density field plus divisor sidecar
  * certificate JSON  -- almost-Fuchsian certificate dict
  * run manifest JSON -- input paths, config, seed, git-style blob hashes
  * VTK legacy ASCII  -- POLYDATA with point scalars for external viewers
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile

import numpy as np

from .errors import TodaError


def atomic_write_text(path, text):
    """Write text to path via a temp file in the same directory + rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def git_blob_sha1(data):
    """Content hash in git blob style: sha1(b"blob <len>\\0" + data)."""
    if isinstance(data, str):
        data = data.encode()
    h = hashlib.sha1()
    h.update(b"blob %d\0" % len(data))
    h.update(data)
    return h.hexdigest()


def file_blob_sha1(path):
    with open(path, "rb") as handle:
        return git_blob_sha1(handle.read())


def dump_json(obj):
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def write_json(path, obj):
    atomic_write_text(path, dump_json(obj))


def read_json(path):
    with open(path) as handle:
        return json.load(handle)


# ----------------------------------------------------------------------
# Field CSV

def field_csv_text(name, values):
    lines = [f"vertex_index,{name}"]
    for i, val in enumerate(values):
        lines.append(f"{i},{float(val)!r}")
    return "\n".join(lines) + "\n"


def write_field_csv(path, name, values):
    atomic_write_text(path, field_csv_text(name, values))


def read_field_csv(path, expected_name=None):
    """Returns (name, values). Rows may arrive in any vertex order."""
    with open(path) as handle:
        rows = handle.read().strip().splitlines()
    header = rows[0].split(",")
    if len(header) != 2 or header[0] != "vertex_index":
        raise TodaError(f"bad field CSV header in {path}: {rows[0]!r}")
    name = header[1]
    if expected_name is not None and name != expected_name:
        raise TodaError(
            f"field CSV {path} holds {name!r}, expected {expected_name!r}")
    pairs = []
    for row in rows[1:]:
        idx_s, val_s = row.split(",")
        pairs.append((int(idx_s), float(val_s)))
    values = np.empty(len(pairs))
    seen = np.zeros(len(pairs), dtype=bool)
    for idx, val in pairs:
        if not 0 <= idx < len(pairs) or seen[idx]:
            raise TodaError(f"field CSV {path} has bad vertex indexing")
        values[idx] = val
        seen[idx] = True
    return name, values


# ----------------------------------------------------------------------
# Density files

def write_density(prefix, density):
    from .sections import density_sidecar_dict, density_to_csv
    write_field_csv(prefix + ".csv", "log_density", density.log_density)
    write_json(prefix + ".json", density_sidecar_dict(density))


def read_density(prefix, mesh):
    from .sections import Divisor, SectionDensity
    _, ld = read_field_csv(prefix + ".csv", "log_density")
    if len(ld) != mesh.num_vertices:
        raise TodaError("density file does not match the mesh vertex count")
    sidecar = read_json(prefix + ".json")
    divisor = Divisor([(int(v), int(m)) for v, m in sidecar["divisor"]])
    if divisor.degree != int(sidecar["degree"]):
        raise TodaError("divisor degree disagrees with sidecar degree")
    return SectionDensity(mesh=mesh, log_density=ld, divisor=divisor,
                          curvature_constant=float(sidecar["c_L"]),
                          normalization=sidecar["normalization"])


# ----------------------------------------------------------------------
# Run manifest

def run_manifest(mesh_path, density_path, config_dict, seed):
    manifest = {
        "mesh": mesh_path,
        "density": density_path,
        "config": config_dict,
        "seed": seed,
        "hashes": {},
    }
    if mesh_path is not None:
        manifest["hashes"]["mesh"] = file_blob_sha1(mesh_path)
    if density_path is not None:
        manifest["hashes"]["density_csv"] = file_blob_sha1(
            density_path + ".csv")
        manifest["hashes"]["density_json"] = file_blob_sha1(
            density_path + ".json")
    return manifest


# ----------------------------------------------------------------------
# VTK legacy ASCII export

def vtk_text(mesh, scalars):
    """POLYDATA with the mesh drawn at its unit-disk vertex positions.

    scalars is an ordered list of (name, values) point-data channels.
    Non-finite values (e.g. log of a vanishing density) are clamped to a
    large negative sentinel so external viewers keep working.
    """
    pos = mesh.positions
    lines = ["# vtk DataFile Version 3.0",
             "hyperbolic surface fields",
             "ASCII",
             "DATASET POLYDATA",
             f"POINTS {mesh.num_vertices} double"]
    for z in pos:
        lines.append(f"{float(z.real)!r} {float(z.imag)!r} 0.0")
    F = mesh.num_faces
    lines.append(f"POLYGONS {F} {4 * F}")
    for tri in mesh.triangles:
        lines.append(f"3 {tri[0]} {tri[1]} {tri[2]}")
    lines.append(f"POINT_DATA {mesh.num_vertices}")
    for name, values in scalars:
        clean = np.where(np.isfinite(values), values, -1e300)
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        for val in clean:
            lines.append(repr(float(val)))
    return "\n".join(lines) + "\n"


def write_vtk(path, mesh, scalars):
    atomic_write_text(path, vtk_text(mesh, scalars))
