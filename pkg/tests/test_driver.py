import csv
import json

import numpy as np
import pytest

from dgobstacle import meshio
from dgobstacle.assembly import MethodConfig
from dgobstacle.driver import (CSV_COLUMNS, adaptive_solve, fit_slope, initial_mesh, mark_elements,
                               solve_once, write_outputs)
from dgobstacle.mesh import build_rect_mesh, refine_nvb
from dgobstacle.multiplier import NONCONTACT
from dgobstacle.problems import ProblemSpec, builtin_example, example1_exact, example2_obstacle


def test_builtin_examples():
    assert example1_exact(1.5, 1.5) == pytest.approx(2.25 - np.log(np.sqrt(4.5)) - 0.5)
    assert example1_exact(1.5, 1.5) == pytest.approx(0.99797, abs=1e-5)
    assert example1_exact(1.0, 0.0) == 0.0 and example1_exact(0.3, 0.2) == 0.0
    assert example2_obstacle(0.0, 0.0) == pytest.approx(4.0)
    e1 = builtin_example(1)
    assert e1.exact is not None and e1.bounds == (-1.5, 1.5, -1.5, 1.5)
    e2 = builtin_example(2, 0)
    assert e2.exact is None and e2.f(0.3, 0.1) == 0.0
    assert builtin_example(2, -15).f(0.0, 0.0) == -15.0
    with pytest.raises(ValueError):
        builtin_example(3)
    with pytest.raises(ValueError):
        builtin_example(2, 7)


def test_problem_spec_validation():
    with pytest.raises(ValueError):
        builtin_example(1, gamma=0.0)
    with pytest.raises(ValueError):
        builtin_example(1, gamma=1.5)
    with pytest.raises(ValueError, match="obstacle"):
        ProblemSpec("bad", (0, 1, 0, 1), (1, 1), lambda x, y: 0 * x, lambda x, y: 1 + 0 * x)
    assert builtin_example(1).max_dofs == 50_000
    assert builtin_example(1, cfg=MethodConfig(degree=2)).max_dofs == 100_000


def test_mark_elements():
    assert list(mark_elements([1.0, 0.5, 0.3], 0.4)) == [0, 1]
    assert list(mark_elements([1.0, 0.5, 1.0], 1.0)) == [0, 2]
    assert list(mark_elements([1.0, 0.5, 0.0], 1e-12)) == [0, 1]
    assert mark_elements([0.0, 0.0], 0.4).size == 0
    with pytest.raises(ValueError):
        mark_elements([1.0], 0.0)


def test_solve_once_example1():
    spec = builtin_example(1)
    out = solve_once(initial_mesh(spec), spec)
    assert out.pdas.converged
    assert out.multiplier.sigma.max() <= 1e-9 * max(1, np.abs(out.F).max())


def test_solve_once_deterministic():
    spec = builtin_example(2, cfg=MethodConfig(degree=2, kind=2))
    mesh = refine_nvb(initial_mesh(spec), [0, 5])
    a, b = solve_once(mesh, spec), solve_once(mesh, spec)
    assert np.array_equal(a.u.coefficients, b.u.coefficients)
    assert a.eta_h == b.eta_h


def test_low_obstacle_is_unconstrained():
    spec = ProblemSpec("low", (0, 1, 0, 1), (2, 2), lambda x, y: np.full(np.shape(x), -1.0),
                       lambda x, y: np.full(np.shape(x), -1e6))
    out = solve_once(initial_mesh(spec), spec)
    assert np.all(out.labels == NONCONTACT)
    b = out.breakdown
    assert b.obsplus.max() == 0 and b.obsneg.max() == 0 and b.eta_h > 0


def test_adaptive_solve_record():
    spec = builtin_example(1, max_iters=4)
    rec = adaptive_solve(spec)
    assert rec.status == "max iterations reached" and len(rec.rows) == 4
    dofs = rec.column("dofs")
    assert np.all(np.diff(dofs) > 0)
    assert np.all(np.diff(rec.column("h_min")) <= 0)
    assert np.all(rec.column("efficiency") > 0)
    for row in rec.rows:
        assert set(CSV_COLUMNS) <= set(row)


def test_adaptive_solve_stops_at_max_dofs():
    spec = builtin_example(2, max_dofs=400)
    rec = adaptive_solve(spec)
    assert rec.status == "max dofs reached"
    assert rec.rows[-1]["dofs"] <= 400
    assert all(r["error_linf"] is None for r in rec.rows)


def test_write_outputs(tmp_path):
    spec = builtin_example(2, max_iters=3)
    rec = adaptive_solve(spec)
    paths = write_outputs(rec, tmp_path / "out", spec, emit_meshes=True, extra_config={"seed": 4})
    with open(tmp_path / "out" / "convergence.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == CSV_COLUMNS and len(rows) == 4
    err_col = CSV_COLUMNS.index("error_linf")
    assert all(r[err_col] == "" and r[err_col + 1] == "" for r in rows[1:])
    cfg = json.loads((tmp_path / "out" / "run.json").read_text())
    assert cfg["seed"] == 4 and cfg["method"] == "sipg" and cfg["f_variant"] == -15
    vtk = [p for p in paths if str(p).endswith(".vtk")]
    assert len(vtk) == 3
    pts, cells, types = meshio.read_vtk(vtk[-1])
    assert len(cells) == rec.meshes[-1].n_elements and np.all(types == 5)
    assert len(pts) == rec.meshes[-1].n_vertices


def test_outputs_bit_identical(tmp_path):
    spec = builtin_example(1, max_iters=3)
    a = write_outputs(adaptive_solve(spec), tmp_path / "a", spec)
    b = write_outputs(adaptive_solve(spec), tmp_path / "b", spec)
    read = lambda p: [line.rsplit(",", 1)[0] for line in open(p)]
    # wall time is the final column; everything else must match byte for byte
    assert read(a[0]) == read(b[0])


def test_write_outputs_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    rec = adaptive_solve(builtin_example(1, max_iters=1))
    with pytest.raises(OSError, match="file"):
        write_outputs(rec, blocker / "sub", None)


def test_fit_slope():
    x = np.array([1e2, 1e3, 1e4, 1e5, 1e6, 1e7])
    assert fit_slope(x, 3 * x ** -1.5) == pytest.approx(-1.5)


def test_text_mesh_round_trip():
    mesh = refine_nvb(build_rect_mesh(0, 1, 0, 1, 2, 1), [1])
    back = meshio.loads_text(meshio.dumps_text(mesh))
    assert np.array_equal(back.vertices, mesh.vertices)
    assert np.array_equal(back.elements, mesh.elements)
    assert np.array_equal(back.ref_edge, mesh.ref_edge)
    assert np.array_equal(back.generation, mesh.generation)
    with pytest.raises(ValueError):
        meshio.loads_text("1 2 3\n")
