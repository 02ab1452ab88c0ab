import json
import math

import numpy as np
import pytest

from helfrich import shapes
from helfrich.cli import (
    EXIT_DEGENERATE,
    EXIT_ERROR,
    EXIT_NOT_FOUND,
    EXIT_NOT_GRAPH,
    EXIT_OK,
    EXIT_OUT_OF_RADIUS,
    RunConfig,
    main,
)
from helfrich.mesh import area, enclosed_volume, load_mesh, save_mesh

from conftest import FOUR_PI, rel


@pytest.fixture(scope="module")
def meshes(tmp_path_factory):
    d = tmp_path_factory.mktemp("meshes")
    made = {
        "ico3": shapes.icosphere(3),
        "ico4": shapes.icosphere(4),
        "torus": shapes.torus(2.0, 0.5, 32, 16),
        "pert2": shapes.perturbed_sphere(2, 0.05),
        "pert3": shapes.perturbed_sphere(3, 0.05),
        "ripple": shapes.rippled_sphere(4, amplitude=0.02, wavelength=0.15, width=0.1),
        "slab": shapes.grid_cube(16),
        "tet": shapes.tetrahedron(),
    }
    paths = {}
    for k, m in made.items():
        paths[k] = d / f"{k}.off"
        save_mesh(m, paths[k])
    return paths


def run(*args):
    return main([str(a) for a in args])


def read_json(path):
    return json.loads(path.read_text())


def tree_bytes(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


# -- analyze ------------------------------------------------------------------


def test_analyze_sphere(meshes, tmp_path):
    assert run("analyze", "--mesh", meshes["ico4"], "--out", tmp_path, "--h0", 0) == EXIT_OK
    a = read_json(tmp_path / "analysis.json")
    assert rel(a["willmore"], FOUR_PI) < 0.02
    assert a["genus"] == 0
    assert abs(a["gauss_bonnet_error"]) <= 1e-9
    assert rel(a["vol_current"], a["vol_divergence"]) < 0.02
    lines = (tmp_path / "diagnostics.csv").read_text().splitlines()
    assert lines[0] == "x,y,z,local_A2,good,density_ratio"
    assert len(lines) == a["n_vertices"] + 1


def test_analyze_torus(meshes, tmp_path):
    assert run("analyze", "--mesh", meshes["torus"], "--out", tmp_path) == EXIT_OK
    assert read_json(tmp_path / "analysis.json")["genus"] == 1


def test_missing_mesh(tmp_path, capsys):
    out = tmp_path / "out"
    assert run("analyze", "--mesh", tmp_path / "nope.off", "--out", out) == EXIT_NOT_FOUND
    assert "input mesh not found" in capsys.readouterr().err
    assert not out.exists()


# -- correct ------------------------------------------------------------------


def test_correct_current_targets(meshes, tmp_path):
    m = load_mesh(meshes["pert3"])
    assert run("correct", "--mesh", meshes["pert3"], "--out", tmp_path,
               "--area0", repr(area(m)), "--vol0", repr(enclosed_volume(m))) == EXIT_OK
    r = read_json(tmp_path / "correction.json")
    assert r["s"] == 0.0 and r["t"] == 0.0


def test_correct_reachable_targets(meshes, tmp_path):
    m = load_mesh(meshes["pert3"])
    A, V = area(m), enclosed_volume(m)
    assert run("correct", "--mesh", meshes["pert3"], "--out", tmp_path,
               "--area0", repr(A * (1 + 2e-6)), "--vol0", repr(V * (1 - 2e-6))) == EXIT_OK
    r = read_json(tmp_path / "correction.json")
    assert abs(r["relative_residual_area"]) <= 1e-9
    assert abs(r["relative_residual_vol"]) <= 1e-9
    fixed = load_mesh(tmp_path / "corrected.off")
    assert rel(area(fixed), A * (1 + 2e-6)) <= 1e-9


@pytest.mark.xfail(strict=True, reason="the perturbed sphere is about 2% away from (4 pi, 4 pi / 3), "
                   "far outside the guaranteed correction radius")
def test_correct_to_round_sphere_values(meshes, tmp_path):
    code = run("correct", "--mesh", meshes["pert3"], "--out", tmp_path,
               "--area0", repr(FOUR_PI), "--vol0", repr(FOUR_PI / 3))
    assert code == EXIT_OK
    r = read_json(tmp_path / "correction.json")
    assert abs(r["relative_residual_area"]) <= 1e-9


def test_correct_absurd_targets(meshes, tmp_path):
    out = tmp_path / "out"
    code = run("correct", "--mesh", meshes["pert3"], "--out", out, "--area0", 12.0, "--vol0", 50.0)
    assert code == EXIT_OUT_OF_RADIUS
    assert not out.exists()


def test_correct_degenerate(meshes, tmp_path):
    code = run("correct", "--mesh", meshes["tet"], "--out", tmp_path / "o", "--area0", 1.0,
               "--vol0", 0.01)
    assert code == EXIT_DEGENERATE


# -- minimize -----------------------------------------------------------------


def test_minimize_perturbed(meshes, tmp_path):
    assert run("minimize", "--mesh", meshes["pert3"], "--out", tmp_path, "--h0", 0) == EXIT_OK
    s = read_json(tmp_path / "summary.json")
    assert rel(s["willmore"], FOUR_PI) <= 0.01
    assert s["accepted_steps"] > 0
    rows = (tmp_path / "run_log.csv").read_text().splitlines()
    assert rows[0] == "step,energy,area,vol,grad_norm,el_residual,s,t,accepted"
    final = load_mesh(tmp_path / "final.off")
    assert rel(area(final), s["area0"]) <= 1e-8


def test_minimize_round_sphere(meshes, tmp_path):
    assert run("minimize", "--mesh", meshes["ico3"], "--out", tmp_path) == EXIT_OK
    assert read_json(tmp_path / "summary.json")["accepted_steps"] == 0


def test_minimize_zero_steps(meshes, tmp_path):
    assert run("minimize", "--mesh", meshes["pert2"], "--out", tmp_path, "--max-steps", 0) == EXIT_OK
    s = read_json(tmp_path / "summary.json")
    assert s["accepted_steps"] == 0
    assert s["final_energy"] == s["initial_energy"]
    assert len((tmp_path / "run_log.csv").read_text().splitlines()) == 2


# -- replace ------------------------------------------------------------------


def test_replace_ripple(meshes, tmp_path):
    code = run("replace", "--mesh", meshes["ripple"], "--out", tmp_path, "--center", 0, 0, 1,
               "--patch-radius", 0.45)
    assert code == EXIT_OK
    r = read_json(tmp_path / "delta_report.json")
    assert r["d_helfrich"] < 0
    assert load_mesh(tmp_path / "replaced.off").n_vertices == load_mesh(meshes["ripple"]).n_vertices


def test_replace_flat(meshes, tmp_path):
    code = run("replace", "--mesh", meshes["slab"], "--out", tmp_path, "--center", 0.5, 0.5, 1,
               "--patch-radius", 0.3)
    assert code == EXIT_OK
    r = read_json(tmp_path / "delta_report.json")
    for k in ("d_area", "d_vol", "d_helfrich"):
        assert abs(r[k]) <= 1e-8


def test_replace_fold(meshes, tmp_path):
    code = run("replace", "--mesh", meshes["ico3"], "--out", tmp_path / "o", "--center", 1, 0, 0,
               "--patch-radius", 1.5)
    assert code == EXIT_NOT_GRAPH
    assert not (tmp_path / "o").exists()


# -- configuration and determinism ------------------------------------------


def test_config_round_trip():
    cfg = RunConfig(command="replace", mesh="m.off", out="o", center=[0.0, 0.0, 1.0], h0=0.5,
                    area0=12.0, vol0=4.0, sigma=0.2, seed=7)
    again = RunConfig.from_dict(json.loads(cfg.to_json()))
    assert again == cfg
    assert again.to_json() == cfg.to_json()


@pytest.mark.parametrize("patch", [{"bogus": 1}, {"schema_version": 2}, {"step_tol": -1.0},
                                   {"energy_tol": 0.0}, {"grid_resolution": 8}])
def test_invalid_config_rejected(meshes, tmp_path, patch):
    cfg = RunConfig(command="minimize", mesh=str(meshes["pert2"]), out=str(tmp_path / "o")).to_dict()
    cfg.update(patch)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert run("minimize", "--config", path) == EXIT_ERROR
    assert not (tmp_path / "o").exists()


def test_config_command_mismatch(meshes, tmp_path):
    cfg = RunConfig(command="analyze", mesh=str(meshes["ico3"]), out=str(tmp_path / "o"))
    path = tmp_path / "cfg.json"
    path.write_text(cfg.to_json())
    assert run("minimize", "--config", path) == EXIT_ERROR


def test_flags_override_config(meshes, tmp_path):
    first = tmp_path / "a"
    assert run("minimize", "--mesh", meshes["pert2"], "--out", first, "--max-steps", 3) == EXIT_OK
    second = tmp_path / "b"
    assert run("minimize", "--config", first / "config.json", "--out", second) == EXIT_OK
    assert tree_bytes(first) == {**tree_bytes(second),
                                 "config.json": (first / "config.json").read_bytes()}
    cfg = read_json(second / "config.json")
    assert cfg["out"] == str(second) and cfg["max_steps"] == 3


@pytest.mark.parametrize("cmd,extra", [
    ("minimize", ["--max-steps", 4]),
    ("correct", []),
    ("replace", ["--center", 0, 0, 1, "--patch-radius", 0.45]),
])
def test_byte_identical_reruns(meshes, tmp_path, cmd, extra):
    mesh = meshes["ripple"] if cmd == "replace" else meshes["pert2"]
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        assert run(cmd, "--mesh", mesh, "--out", d, "--seed", 3, *extra) == EXIT_OK
        outs.append(tree_bytes(d))
    a, b = outs
    a.pop("config.json"), b.pop("config.json")
    assert a == b and len(a) >= 2
