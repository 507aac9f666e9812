"""End-to-end exercises of the command-line front end (in-process)."""

import json
import os

import numpy as np
import pytest

from todalab import fileio
from todalab.cli import main
from todalab.mesh import mesh_from_json


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Base mesh, 2-cover, base density, and a lifted balanced density."""
    root = tmp_path_factory.mktemp("cli")
    paths = {
        "base": str(root / "base.json"),
        "cover": str(root / "cover.json"),
        "base_dens": str(root / "base_dens"),
        "cover_dens": str(root / "cover_dens"),
        "root": root,
    }
    assert main(["mesh", "--genus2", "--refine", "2",
                 "-o", paths["base"]]) == 0
    assert main(["cover", "--mesh", paths["base"], "--n", "2",
                 "-o", paths["cover"]]) == 0
    assert main(["section", "--mesh", paths["base"],
                 "--divisor", "0:1,1:1,5:1,20:1",
                 "-o", paths["base_dens"]]) == 0
    assert main(["section", "--mesh", paths["cover"], "--balanced",
                 "--base-mesh", paths["base"],
                 "--base-density", paths["base_dens"],
                 "--zero-vertex", "3",
                 "-o", paths["cover_dens"]]) == 0
    return paths


def test_mesh_and_cover_files(workspace):
    with open(workspace["base"]) as handle:
        base = mesh_from_json(handle.read())
    assert base.genus == 2
    assert base.num_vertices == 62
    with open(workspace["cover"]) as handle:
        cover = mesh_from_json(handle.read())
    assert cover.genus == 3
    assert cover.num_vertices == 124


def test_section_files(workspace):
    with open(workspace["cover_dens"] + ".json") as handle:
        sidecar = json.load(handle)
    assert sidecar["degree"] == 9
    assert len(sidecar["divisor"]) == 9


def test_solve_gauss_constant(workspace, tmp_path):
    out = str(tmp_path / "g")
    assert main(["solve-gauss", "--mesh", workspace["base"],
                 "--constant", "0.1", "-o", out]) == 0
    _, u = fileio.read_field_csv(out + "_u.csv", "u")
    expected = 0.5 * np.log(0.5 * (1 + np.sqrt(1 - 0.4)))
    assert np.abs(u - expected).max() < 1e-10
    report = fileio.read_json(out + "_gauss.json")
    assert report["residual"] <= 1e-10


def test_solve_gauss_rejects_inadmissible(workspace, tmp_path):
    out = str(tmp_path / "g")
    code = main(["solve-gauss", "--mesh", workspace["base"],
                 "--constant", "0.3", "-o", out])
    assert code == 1


def test_solve_ricci_and_zero_density_error(workspace, tmp_path):
    out = str(tmp_path / "r")
    assert main(["solve-ricci", "--mesh", workspace["base"],
                 "--density", workspace["base_dens"],
                 "--scale", "0.1", "--degree", "1", "-o", out]) == 0
    report = fileio.read_json(out + "_ricci.json")
    assert report["grad_norm"] <= 1e-9

    zero_prefix = str(tmp_path / "zero")
    assert main(["section", "--mesh", workspace["base"], "--zero",
                 "-o", zero_prefix]) == 0
    code = main(["solve-ricci", "--mesh", workspace["base"],
                 "--density", zero_prefix, "-o", str(tmp_path / "rz")])
    assert code == 1


def test_coupled_run_verify_export_deterministic(workspace, tmp_path):
    run1 = str(tmp_path / "run1")
    run2 = str(tmp_path / "run2")
    cli_args = ["solve-coupled", "--mesh", workspace["cover"],
                "--density", workspace["cover_dens"], "--degree", "1"]
    assert main(cli_args + ["-o", run1]) == 0
    assert main(cli_args + ["-o", run2]) == 0

    # Determinism: both runs produce byte-identical artifacts.
    for name in ("u.csv", "v.csv", "certificate.json", "manifest.json"):
        with open(os.path.join(run1, name), "rb") as h1, \
             open(os.path.join(run2, name), "rb") as h2:
            assert h1.read() == h2.read(), name

    cert = fileio.read_json(os.path.join(run1, "certificate.json"))
    assert cert["converged"] is True
    assert cert["almost_fuchsian"] is True
    assert cert["sup_af"] < 0.5

    assert main(["verify", "--run", run1]) == 0

    # Tampering with the certificate must fail verification.
    cert_path = os.path.join(run1, "certificate.json")
    cert["sup_af"] = 0.0
    fileio.write_json(cert_path, cert)
    assert main(["verify", "--run", run1]) == 1

    vtk = str(tmp_path / "fields.vtk")
    assert main(["export", "--mesh", workspace["cover"], "--run", run2,
                 "-o", vtk]) == 0
    with open(vtk) as handle:
        text = handle.read()
    assert text.startswith("# vtk DataFile Version 3.0")
    assert "SCALARS af_integrand double 1" in text
    assert "np.float64" not in text


def test_verify_mesh_and_density(workspace):
    assert main(["verify", "--mesh", workspace["base"],
                 "--density", workspace["base_dens"]]) == 0


def test_probe_report(workspace, tmp_path):
    out = str(tmp_path / "probe.json")
    assert main(["probe", "--mesh", workspace["base"], "--samples", "2",
                 "-o", out]) == 0
    report = fileio.read_json(out)
    assert set(report) == {"spectral", "mt_constant", "samples", "seed"}
    assert report["spectral"]["lambda0"] <= 1e-10
    assert report["spectral"]["lambda1"] > 0
    assert report["mt_constant"] > 0


def test_config_file_defaults_and_precedence(workspace, tmp_path):
    cfg = tmp_path / "cfg.json"
    out_a = str(tmp_path / "a.json")
    out_b = str(tmp_path / "b.json")
    cfg.write_text(json.dumps({"refine": 1, "output": out_a}))
    assert main(["mesh", "--config", str(cfg)]) == 0
    with open(out_a) as handle:
        mesh = mesh_from_json(handle.read())
    assert mesh.num_vertices == 14  # config-supplied refinement level

    # Explicit flags win over config values.
    assert main(["mesh", "--config", str(cfg), "--refine", "0",
                 "-o", out_b]) == 0
    with open(out_b) as handle:
        mesh = mesh_from_json(handle.read())
    assert mesh.num_vertices == 2


def test_usage_errors(workspace, tmp_path):
    # Unknown subcommand -> argparse exit 2.
    assert main(["frobnicate"]) == 2
    # Missing input file -> usage error 2.
    assert main(["cover", "--mesh", str(tmp_path / "nope.json"),
                 "--n", "2", "-o", str(tmp_path / "x.json")]) == 2
    # Section without a mode -> ValueError -> 2.
    assert main(["section", "--mesh", workspace["base"],
                 "-o", str(tmp_path / "d")]) == 2
    # Degree out of range -> domain error 1.
    code = main(["solve-coupled", "--mesh", workspace["base"],
                 "--density", workspace["base_dens"], "--degree", "5",
                 "-o", str(tmp_path / "bad")])
    assert code == 1
