"""Adaptive SOLVE -> ESTIMATE -> MARK -> REFINE loop and run outputs."""
from dataclasses import dataclass, field, asdict
import csv
import json
import logging
import os
import time

import numpy as np

from . import meshio
from .assembly import assemble_load, assemble_operator, build_constraints, edge_traces, space_for
from .estimator import element_indicators, global_estimate, field_linf_max
from .fespace import DGFunction, Geometry, values_at
from .mesh import build_rect_mesh, refine_nvb, topology
from .multiplier import (classify, element_layer, free_boundary_elements, invariant_tolerance,
                         multiplier_violations, recover)
from . import quadrature as quad
from .solver import NonConvergenceError, pdas_solve

log = logging.getLogger(__name__)

CSV_COLUMNS = ["iter", "elements", "dofs", "h_min", "eta1", "eta2", "eta3", "eta4", "eta5",
               "eta_total", "error_linf", "efficiency", "pdas_iters", "seconds"]


class InvariantError(RuntimeError):
    """A multiplier sign or complementarity invariant failed after a solve."""


@dataclass(eq=False)
class SolveOutput:
    mesh: object
    topo: object
    geom: object
    u: DGFunction
    multiplier: object
    breakdown: object
    pdas: object
    constraints: object
    A: object
    F: np.ndarray
    labels: np.ndarray
    violations: dict

    @property
    def eta_h(self):
        return self.breakdown.eta_h


def initial_mesh(spec):
    xmin, xmax, ymin, ymax = spec.bounds
    return build_rect_mesh(xmin, xmax, ymin, ymax, *spec.cells)


def solve_once(mesh, spec, strict=True, pdas_options=None):
    """Assemble, solve, recover the multiplier and evaluate the estimator on ``mesh``."""
    cfg = spec.cfg
    topo = topology(mesh)
    geom = Geometry.of(mesh)
    space = space_for(mesh, cfg)
    traces = edge_traces(mesh, topo, cfg.degree, geom)
    A = assemble_operator(mesh, topo, space, cfg, geom, traces)
    F = assemble_load(mesh, space, spec.f, topo, cfg, spec.g, geom, traces)
    K = build_constraints(mesh, space, cfg, spec.chi, geom)
    res = pdas_solve(A, F, K, **(pdas_options or {}))
    u = DGFunction(space, res.u)
    mult = recover(mesh, A, F, res.u_accurate, cfg.kind, cfg.degree, geom)
    viol = multiplier_violations(mult, K, res.u)
    if strict and max(viol.values()) > invariant_tolerance(F):
        raise InvariantError(f"multiplier invariants violated: {viol}")
    br = element_indicators(mesh, topo, u, mult, spec.f, spec.chi, cfg.kind, g=spec.g, geom=geom)
    labels = classify(K, res.u)
    return SolveOutput(mesh, topo, geom, u, mult, br, res, K, A, F, labels, viol)


def mark_elements(indicators, gamma=0.4):
    """Maximum marking: ``{T : eta_T >= gamma * max eta}``."""
    if not 0 < gamma <= 1:
        raise ValueError("marking parameter must lie in (0, 1]")
    ind = np.asarray(indicators, dtype=float)
    top = ind.max(initial=0.0)
    if top <= 0:
        return np.zeros(0, dtype=np.int64)
    return np.flatnonzero(ind >= gamma * top)


def linf_error(out, exact, m=6):
    """Lattice sup-norm of ``exact - u_h`` (a lower bound of the true error)."""
    lam = quad.lattice(m)
    x = out.geom.to_physical(lam)
    diff = exact(x[..., 0], x[..., 1]) - values_at(out.u, out.geom, lam)
    return float(np.abs(diff).max())


@dataclass(eq=False)
class RunRecord:
    rows: list = field(default_factory=list)
    meshes: list = field(default_factory=list)
    marked: list = field(default_factory=list)
    labels: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    tolerances: list = field(default_factory=list)
    status: str = "running"

    def column(self, name):
        return np.array([np.nan if r[name] is None else r[name] for r in self.rows], dtype=float)


def adaptive_solve(spec, keep_meshes=True, strict=True, callback=None):
    """Run the adaptive loop until ``spec.max_dofs`` or ``spec.max_iters``.

    The record is returned even on failure (``status`` holds the reason);
    solver nonconvergence is re-raised with the partial record attached as
    ``exc.record``.
    """
    rec = RunRecord()
    mesh = initial_mesh(spec)
    nloc = 3 if spec.cfg.degree == 1 else 6
    for it in range(spec.max_iters):
        t0 = time.perf_counter()
        try:
            out = solve_once(mesh, spec, strict=strict)
        except NonConvergenceError as exc:
            rec.status = f"nonconvergence at iteration {it}"
            exc.record = rec
            raise
        eta_h, ind = global_estimate(out.breakdown)
        err = linf_error(out, spec.exact) if spec.exact is not None else None
        eta = out.breakdown.eta
        row = {
            "iter": it, "elements": mesh.n_elements, "dofs": nloc * mesh.n_elements,
            "h_min": out.breakdown.h_min, "eta1": eta[0], "eta2": eta[1], "eta3": eta[2],
            "eta4": eta[3], "eta5": eta[4], "eta_total": eta_h, "error_linf": err,
            "efficiency": (eta_h / err) if err else None, "pdas_iters": out.pdas.iterations,
        }
        marked = mark_elements(ind, spec.gamma)
        row["seconds"] = time.perf_counter() - t0
        rec.rows.append(row)
        rec.marked.append(marked)
        rec.labels.append(out.labels)
        rec.violations.append(out.violations)
        rec.tolerances.append(invariant_tolerance(out.F))
        if keep_meshes:
            rec.meshes.append(mesh)
        log.info("iter %d: %d dofs, eta %.3e, err %s", it, row["dofs"], eta_h, err)
        if callback is not None:
            callback(it, out, row)
        if marked.size == 0:
            rec.status = "converged to zero estimator"
            return rec
        nxt = refine_nvb(mesh, marked)
        if nloc * nxt.n_elements > spec.max_dofs:
            rec.status = "max dofs reached"
            return rec
        mesh = nxt
    rec.status = "max iterations reached"
    return rec


def fit_slope(x, y, last=5):
    """Least-squares slope of ``log y`` against ``log x`` over the final ``last`` points."""
    x = np.asarray(x, dtype=float)[-last:]
    y = np.asarray(y, dtype=float)[-last:]
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_outputs(record, out_dir, spec=None, emit_meshes=False, extra_config=None):
    """Write ``convergence.csv``, ``run.json`` and optional VTK meshes into ``out_dir``."""
    try:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, "convergence.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for row in record.rows:
                w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
        written = [path]
        if emit_meshes:
            for it, mesh in enumerate(record.meshes):
                p = os.path.join(out_dir, f"mesh_{it:03d}.vtk")
                meshio.write_vtk(p, mesh, cell_data={"generation": mesh.generation})
                written.append(p)
        config = run_config(spec) if spec is not None else {}
        config.update(extra_config or {})
        config["status"] = record.status
        p = os.path.join(out_dir, "run.json")
        with open(p, "w") as fh:
            json.dump(config, fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(p)
        return written
    except OSError as exc:
        raise OSError(f"cannot write outputs to {out_dir}: {exc}") from exc


def run_config(spec):
    cfg = spec.cfg
    return {
        "problem": spec.name, **spec.params, "bounds": list(spec.bounds), "cells": list(spec.cells),
        "degree": cfg.degree, "constraints": "integral" if cfg.kind == 1 else "quadrature",
        "method": cfg.method, "theta": cfg.theta, "penalty": cfg.penalty, "gamma": spec.gamma,
        "max_dofs": spec.max_dofs, "max_iters": spec.max_iters,
    }


def marked_near_free_boundary(record, iteration, kind):
    """Fraction of the elements marked at ``iteration`` lying within one layer of the free boundary."""
    mesh = record.meshes[iteration]
    marked = record.marked[iteration]
    if marked.size == 0:
        return float("nan")
    fb = free_boundary_elements(mesh, topology(mesh), record.labels[iteration], kind)
    near = element_layer(mesh, fb)
    return float(near[marked].mean())
