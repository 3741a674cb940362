import json
import subprocess
import sys

import numpy as np
import numpy.testing as npt
import pytest

from pfx4 import config as cfg
from pfx4.bench import (BenchmarkSpec, Ramp, branching_plate_spec,
                        build_problem, crack_points, hausdorff_distance,
                        shear_plate_spec)
from pfx4.gmsh_io import read_gmsh, write_gmsh
from pfx4.mesh import generate_notched_square, generate_rectangle
from pfx4.probes import (FieldSampler, sample_line, write_line_csv,
                         write_probe_csv)
from pfx4.vtk_io import read_vtk_points, write_vtk


def test_ramp_integral():
    r = Ramp(260.0, 25e-6)
    npt.assert_allclose(r(12.5e-6), 130.0)
    npt.assert_allclose(r(30e-6), 260.0)
    npt.assert_allclose(r.integral(25e-6), 0.5 * 260.0 * 25e-6)
    npt.assert_allclose(r.integral(65e-6), 260.0 * (65e-6 - 12.5e-6))


def test_benchmark_spec_roundtrip():
    spec = shear_plate_spec(scheme="MIXED_Q9Q9", beta_s2=35e-5,
                            mesh_level="tiny")
    again = BenchmarkSpec.from_dict(spec.to_dict())
    assert again == spec
    tree = cfg.spec_to_config(spec)
    text = cfg.dumps(tree)
    back = cfg.spec_from_config(cfg.loads(text))
    assert back == spec


def test_config_parser_subset():
    text = """
# comment
[problem]
benchmark = "shear_plate"   # inline comment
mesh_level = "tiny"

[scheme]
kind = "MIXED_Q4Q4"
beta_s2 = 3.5e-4
lambda0 = 2.0

[time]
adaptive = false
values = [1.0, 2.0, 3.0]
"""
    tree = cfg.loads(text)
    assert tree["scheme"]["kind"] == "MIXED_Q4Q4"
    assert tree["scheme"]["beta_s2"] == pytest.approx(3.5e-4)
    assert tree["time"]["adaptive"] is False
    assert tree["time"]["values"] == [1.0, 2.0, 3.0]
    spec = cfg.spec_from_config(tree)
    assert spec.scheme == "MIXED_Q4Q4"
    assert spec.lambda0 == 2.0


def test_config_parser_rejects_garbage():
    with pytest.raises(cfg.ConfigError):
        cfg.loads("key value\n")
    with pytest.raises(cfg.ConfigError):
        cfg.loads("[unclosed\n")
    with pytest.raises(cfg.ConfigError):
        cfg.loads("x = {}\n")


def test_gmsh_roundtrip(tmp_path):
    mesh = generate_notched_square(1.0, 0.5, 0.5, h=0.25)
    path = tmp_path / "plate.msh"
    write_gmsh(path, mesh)
    back = read_gmsh(path)
    npt.assert_allclose(back.nodes, mesh.nodes)
    assert np.array_equal(back.elements, mesh.elements)
    for name, faces in mesh.side_sets.items():
        got = {tuple(r) for r in back.side_sets[name]}
        assert got == {tuple(r) for r in faces}


def test_vtk_roundtrip_points(tmp_path):
    mesh = generate_rectangle(np.linspace(0, 1, 3), np.linspace(0, 1, 3))
    d = np.zeros(mesh.n_nodes)
    path = tmp_path / "out.vtk"
    write_vtk(path, mesh, point_data={"d": d}, cell_data={"H_max":
                                                          np.ones(4)})
    pts = read_vtk_points(path)
    assert pts.shape[0] == mesh.n_nodes
    npt.assert_allclose(pts[:, :2], mesh.nodes)
    text = path.read_text()
    assert "SCALARS d double 1" in text
    assert "CELL_TYPES" in text


def test_sampler_constant_field_and_outside_warning():
    mesh = generate_rectangle(np.linspace(0, 1, 4), np.linspace(0, 1, 4))
    sampler = FieldSampler(mesh)
    vals = 3.7 * np.ones(mesh.n_nodes)
    s, samples = sample_line(sampler, vals, (0.1, 0.2), (0.9, 0.8), 17)
    npt.assert_allclose(samples, 3.7, rtol=1e-12)
    assert s[0] == 0.0 and s[-1] == pytest.approx(np.hypot(0.8, 0.6))
    with pytest.warns(UserWarning):
        sampler.eval_nodal(vals, (1.5, 0.5))


def test_sampler_interpolates_bilinear_exactly():
    mesh = generate_rectangle(np.linspace(0, 1, 5), np.linspace(0, 1, 5))
    sampler = FieldSampler(mesh)
    f = 2.0 + mesh.nodes[:, 0] - 0.5 * mesh.nodes[:, 1]
    rng = np.random.default_rng(0)
    pts = rng.uniform(0.05, 0.95, (20, 2))
    got = sampler.eval_nodal(f, pts)
    npt.assert_allclose(got, 2.0 + pts[:, 0] - 0.5 * pts[:, 1], rtol=1e-10)


def test_probe_csv_schema(tmp_path):
    path = tmp_path / "probes.csv"
    write_probe_csv(path, [0.0, 1e-6],
                    {"zz": [1.0, 2.0], "aa": [3.0, 4.0]})
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "time,aa,zz"  # fixed, sorted column order
    row = lines[1].split(",")
    assert len(row) == 3
    assert float(row[1]) == 3.0
    # full-precision scientific notation round-trips bit-exactly
    assert float(f"{np.pi:.17e}") == np.pi


def test_line_csv(tmp_path):
    path = tmp_path / "line.csv"
    write_line_csv(path, np.array([0.0, 0.5, 1.0]),
                   [(0.0, np.array([1, 2, 3.0])),
                    (1e-6, np.array([4, 5, 6.0]))])
    lines = path.read_text().strip().splitlines()
    assert len(lines) == 3
    assert lines[1].startswith("0.0")


def test_crack_points_and_hausdorff():
    mesh = generate_rectangle(np.linspace(0, 1, 5), np.linspace(0, 1, 5))
    d = np.zeros(mesh.n_nodes)
    band = mesh.select_nodes(lambda x, y: np.abs(y - 0.5) < 0.13)
    d[band] = 1.0
    pts = crack_points(mesh, d)
    assert len(pts) == len(band)
    shifted = pts + np.array([0.0, 0.25])
    npt.assert_allclose(hausdorff_distance(pts, shifted), 0.25, atol=1e-12)
    assert hausdorff_distance(pts, np.empty((0, 2))) == np.inf


def test_build_problem_shear_plate_bcs():
    spec = shear_plate_spec(mesh_level="tiny")
    problem, probes = build_problem(spec)
    mesh = problem.mesh_q4
    # bottom fully fixed, the other three sides slide horizontally
    comps = {}
    for bc in problem.dirichlet:
        for n in bc.nodes:
            comps.setdefault(int(n), set()).add(bc.comp)
    for n in mesh.node_sets["bottom"]:
        assert comps[int(n)] == {0, 1}
    for n in mesh.node_sets["top"]:
        assert comps[int(n)] == {0, 1}
    side_only = (set(map(int, mesh.node_sets["left"]))
                 | set(map(int, mesh.node_sets["right"])))
    side_only -= set(map(int, mesh.node_sets["bottom"]))
    side_only -= set(map(int, mesh.node_sets["top"]))
    for n in side_only:
        assert comps[int(n)] == {1}
    names = {p.name for p in probes}
    assert {"d_at_P", "reaction_x", "line_AB"} <= names


def test_branching_spec_material_table():
    spec = branching_plate_spec()
    m = spec.material
    assert (m["young"], m["poisson"], m["density"]) == (32.0e3, 0.2, 2.45e-9)
    assert (m["gc"], m["l0"]) == (3.0e-3, 0.125)
    assert spec.adaptive is False


def test_cli_usage_errors():
    r = subprocess.run([sys.executable, "-m", "pfx4", "--bogus"],
                       capture_output=True)
    assert r.returncode == 2
    r = subprocess.run([sys.executable, "-m", "pfx4", "bench", "nope"],
                       capture_output=True)
    assert r.returncode == 2


def test_cli_run_missing_config_fails_cleanly():
    r = subprocess.run([sys.executable, "-m", "pfx4", "run", "/no/such.toml"],
                       capture_output=True)
    assert r.returncode == 1
    assert b"error" in r.stderr
