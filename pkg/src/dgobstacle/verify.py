"""Self-checks against the independent oracles (the ``verify`` subcommand)."""
from dataclasses import dataclass
import time

import numpy as np

from . import oracles
from .assembly import MethodConfig, assemble_load, assemble_operator, build_constraints, space_for
from .fespace import DGFunction, eval_dg, integrate_simplex, quadrature_nodes
from .mesh import Mesh, build_rect_mesh, min_angles, refine_nvb, topology, uniform_refine
from .solver import pdas_solve


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail} ({self.seconds:.2f}s)"


def random_triangle(rng):
    while True:
        p = rng.uniform(-2.0, 2.0, size=(3, 2))
        det = (p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1]) - (p[2, 0] - p[0, 0]) * (p[1, 1] - p[0, 1])
        if abs(det) > 1e-2:
            return p if det > 0 else p[[0, 2, 1]]


P2_MONOMIALS = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


def quadrature_errors(n=200, seed=0):
    """Worst relative error of the simplex rule (s=2 on P2, s=1 on P1) against exact integrals."""
    rng = np.random.default_rng(seed)
    worst = {1: 0.0, 2: 0.0}
    for _ in range(n):
        p = random_triangle(rng)
        mesh = Mesh(p, np.array([[0, 1, 2]]), np.array([0]), np.array([0]))
        exact_mono = {m: float(oracles.monomial_integral(p, *m)) for m in P2_MONOMIALS}
        for s, monos in ((2, P2_MONOMIALS), (1, P2_MONOMIALS[:3])):
            coef = rng.standard_normal(len(monos))
            exact = sum(c * exact_mono[m] for m, c in zip(monos, coef))
            scale = max(abs(exact), sum(abs(c * exact_mono[m]) for m, c in zip(monos, coef)))
            pts, _, _ = quadrature_nodes(mesh, 0, s)
            vals = sum(c * pts[:, 0] ** i * pts[:, 1] ** j for (i, j), c in zip(monos, coef))
            got = integrate_simplex(vals, mesh, 0, s)
            worst[s] = max(worst[s], abs(got - exact) / scale)
    return worst


def check_quadrature(n=200, seed=0, tol=1e-12):
    t0 = time.perf_counter()
    w = quadrature_errors(n, seed)
    ok = max(w.values()) <= tol
    return CheckResult("quadrature exactness", ok,
                       f"max rel error s=2 {w[2]:.1e}, s=1 {w[1]:.1e} over {n} triangles",
                       time.perf_counter() - t0)


def oracle_problem(mesh, cfg, f=-8.0, peak=0.02):
    """Small obstacle problem with a mix of active and inactive constraints."""
    topo = topology(mesh)
    space = space_for(mesh, cfg)
    A = assemble_operator(mesh, topo, space, cfg)
    F = assemble_load(mesh, space, lambda x, y: np.full(np.shape(x), f))
    c = mesh.vertices.mean(axis=0)

    def chi(x, y):
        return peak - 0.5 * ((x - c[0]) ** 2 + (y - c[1]) ** 2)

    K = build_constraints(mesh, space, cfg, chi)
    return A, F, K


def oracle_meshes(seed=0, count=6, max_elements=8):
    rng = np.random.default_rng(seed)
    fixed = [build_rect_mesh(0, 1, 0, 1, 1, 1), uniform_refine(build_rect_mesh(0, 1, 0, 1, 1, 1)),
             build_rect_mesh(0, 2, 0, 1, 2, 1), build_rect_mesh(0, 1, 0, 1, 2, 2)]
    return fixed + oracles.random_small_meshes(rng, count, max_elements)


def pdas_oracle_errors(seed=0, count=6):
    """Max-norm gaps between PDAS and brute-force enumeration on small meshes.

    Integral constraints use meshes with at most 8 elements; point
    constraints at most 4 (12 rows).
    """
    rows = []
    for mesh in oracle_meshes(seed, count):
        for degree in (1, 2):
            for kind in (1, 2):
                if kind == 2 and mesh.n_elements > 4:
                    continue
                cfg = MethodConfig(1, 45.0, degree, kind)
                A, F, K = oracle_problem(mesh, cfg)
                res = pdas_solve(A, F, K)
                u_ref, _, active = oracles.enumerate_obstacle_solution(A, F, K.B, K.c)
                rows.append((mesh.n_elements, degree, kind, len(active), K.nrows,
                             float(np.abs(res.u - u_ref).max())))
    return rows


def check_pdas_oracle(seed=0, count=6, tol=1e-8):
    t0 = time.perf_counter()
    rows = pdas_oracle_errors(seed, count)
    worst = max(r[-1] for r in rows)
    mixed = sum(1 for r in rows if 0 < r[3] < r[4])
    return CheckResult("active set solver vs enumeration", worst <= tol,
                       f"{len(rows)} problems ({mixed} with partial contact), max gap {worst:.1e}",
                       time.perf_counter() - t0)


def operator_errors(seed=0):
    """Symmetry, quadratic-form and closed-form checks of the assembled operator."""
    rng = np.random.default_rng(seed)
    out = {"symmetry": 0.0, "form": 0.0, "two_element": 0.0}
    two = build_rect_mesh(0, 1, 0, 1, 1, 1)
    for theta in (1, 0, -1):
        cfg = MethodConfig(theta, None, 1, 1)
        A = assemble_operator(two, topology(two), space_for(two, cfg), cfg).toarray()
        H = oracles.p1_closed_form_operator(two, theta, cfg.penalty)
        out["two_element"] = max(out["two_element"], float(np.abs(A - H).max()))
    for mesh in oracles.random_small_meshes(rng, 3):
        for degree in (1, 2):
            for theta in (1, -1):
                cfg = MethodConfig(theta, None, degree, 1)
                space = space_for(mesh, cfg)
                A = assemble_operator(mesh, topology(mesh), space, cfg)
                if theta == 1:
                    out["symmetry"] = max(out["symmetry"], float(abs(A - A.T).max()))
                a, b = rng.standard_normal(space.ndofs), rng.standard_normal(space.ndofs)
                W, V = DGFunction(space, a), DGFunction(space, b)
                direct = oracles.bilinear_form_direct(
                    mesh, degree, theta, cfg.penalty,
                    lambda t, x, g: eval_dg(W, mesh, t, x, g),
                    lambda t, x, g: eval_dg(V, mesh, t, x, g))
                rel = abs(b @ (A @ a) - direct) / max(1.0, abs(direct))
                out["form"] = max(out["form"], rel)
    return out


def check_operator(seed=0, tol=1e-10):
    t0 = time.perf_counter()
    e = operator_errors(seed)
    return CheckResult("operator assembly", max(e.values()) <= tol,
                       ", ".join(f"{k} {v:.1e}" for k, v in e.items()), time.perf_counter() - t0)


def check_mesh(seed=0, iterations=12):
    """Random adaptive refinements keep the mesh conforming and shape regular."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    mesh = build_rect_mesh(-1.5, 1.5, -1.5, 1.5, 4, 4)
    floor = min_angles(uniform_refine(mesh, 2)).min()
    worst = np.inf
    for _ in range(iterations):
        marked = rng.choice(mesh.n_elements, size=max(1, mesh.n_elements // 10), replace=False)
        mesh = refine_nvb(mesh, marked)
        topology(mesh)
        worst = min(worst, min_angles(mesh).min())
    ok = worst >= floor - 1e-12
    return CheckResult("mesh refinement", ok,
                       f"{mesh.n_elements} elements, min angle {np.degrees(worst):.2f} deg "
                       f"(floor {np.degrees(floor):.2f})", time.perf_counter() - t0)


CHECKS = (check_quadrature, check_operator, check_pdas_oracle, check_mesh)


def run_all(seed=0):
    return [chk(seed=seed) for chk in CHECKS]
