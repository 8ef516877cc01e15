"""Independent reference computations used by the verification suites.

Nothing here shares code paths with the production assembly or solver:
integrals are exact rational arithmetic, edge terms are closed forms, and
the obstacle oracle enumerates active sets with dense linear algebra.
"""
from fractions import Fraction
from itertools import combinations
from math import factorial

import numpy as np


def _poly_mul(p, q):
    out = {}
    for ea, ca in p.items():
        for eb, cb in q.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            out[e] = out.get(e, 0) + ca * cb
    return out


def _poly_pow(p, k):
    out = {(0, 0, 0): Fraction(1)}
    for _ in range(k):
        out = _poly_mul(out, p)
    return out


def monomial_integral(vertices, i, j):
    """Exact ``int_T x^i y^j`` as a Fraction.

    The float vertex coordinates are converted exactly, the monomial is
    expanded in barycentric coordinates and each term is integrated with
    ``int_T l0^a l1^b l2^c = 2|T| a! b! c! / (a + b + c + 2)!``.
    """
    v = [(Fraction(float(x)), Fraction(float(y))) for x, y in vertices]
    x = {(1, 0, 0): v[0][0], (0, 1, 0): v[1][0], (0, 0, 1): v[2][0]}
    y = {(1, 0, 0): v[0][1], (0, 1, 0): v[1][1], (0, 0, 1): v[2][1]}
    poly = _poly_mul(_poly_pow(x, i), _poly_pow(y, j))
    det = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1])
    area = abs(det) / 2
    total = Fraction(0)
    for (a, b, c), coef in poly.items():
        total += coef * Fraction(factorial(a) * factorial(b) * factorial(c),
                                 factorial(a + b + c + 2))
    return 2 * area * total


def polynomial_integral(vertices, coeffs):
    """Exact integral of ``sum coeffs[(i, j)] x^i y^j`` over a triangle."""
    return sum(Fraction(float(c)) * monomial_integral(vertices, i, j)
               for (i, j), c in coeffs.items())


def enumerate_obstacle_solution(A, F, B, c, tol=1e-10):
    """Solve ``A u + B^T lam = F, lam <= 0, B u >= c, lam (B u - c) = 0`` by brute force.

    Every subset of constraint rows is tried as the active set, smallest
    subsets first; the first one whose equality-constrained solution is
    primal and dual feasible is returned as ``(u, lam, active_rows)``.
    Dense arithmetic only, so keep the row count small (at most ~16).
    """
    A = np.asarray(A.toarray() if hasattr(A, "toarray") else A, dtype=float)
    B = np.asarray(B.toarray() if hasattr(B, "toarray") else B, dtype=float)
    F = np.asarray(F, dtype=float)
    c = np.asarray(c, dtype=float)
    n, m = A.shape[0], len(c)
    scale = tol * max(1.0, np.abs(F).max(), np.abs(c).max())
    for k in range(m + 1):
        for rows in combinations(range(m), k):
            rows = list(rows)
            Bs = B[rows]
            K = np.block([[A, Bs.T], [Bs, np.zeros((k, k))]])
            try:
                x = np.linalg.solve(K, np.concatenate([F, c[rows]]))
            except np.linalg.LinAlgError:
                continue
            u, lam_s = x[:n], x[n:]
            if np.all(lam_s <= scale) and np.all(B @ u - c >= -scale):
                lam = np.zeros(m)
                lam[rows] = lam_s
                return u, lam, rows
    raise RuntimeError("no active set satisfies the optimality conditions")


def _edge_table(mesh):
    table = {}
    for t, tri in enumerate(mesh.elements):
        for k in range(3):
            a, b = sorted((int(tri[(k + 1) % 3]), int(tri[(k + 2) % 3])))
            table.setdefault((a, b), []).append(t)
    return table


def _p1_gradients(p):
    M = np.array([[1.0, p[0][0], p[0][1]], [1.0, p[1][0], p[1][1]], [1.0, p[2][0], p[2][1]]])
    coef = np.linalg.inv(M)          # column i: coefficients of hat function i
    area = 0.5 * abs(np.linalg.det(M))
    return coef[1:, :].T, area       # (3, 2)


def p1_closed_form_operator(mesh, theta, penalty):
    """Dense interior penalty matrix for P1 built from closed-form integrals.

    P1 gradients are constant, so ``int_e {d_n phi} [psi] = {d_n phi} int_e [psi]``
    and edge traces of hat functions integrate to ``h/2`` and ``h/6 (1 + delta)``.
    Row index is the test function.
    """
    nt = mesh.n_elements
    A = np.zeros((3 * nt, 3 * nt))
    grads, areas = [], []
    for t in range(nt):
        g, a = _p1_gradients(mesh.vertices[mesh.elements[t]])
        grads.append(g)
        areas.append(a)
        A[3 * t:3 * t + 3, 3 * t:3 * t + 3] += a * g @ g.T
    for (a, b), owners in _edge_table(mesh).items():
        P, Q = mesh.vertices[a], mesh.vertices[b]
        h = float(np.hypot(*(Q - P)))
        t0 = min(owners)
        tri0 = list(mesh.elements[t0])
        opp = mesh.vertices[[v for v in tri0 if v not in (a, b)][0]]
        n = np.array([Q[1] - P[1], P[0] - Q[0]]) / h
        if n @ (opp - P) > 0:
            n = -n
        sides = [(t0, 1.0)] + [(t, -1.0) for t in owners if t != t0]
        avg = 1.0 if len(owners) == 1 else 0.5
        dofs, jump_int, dn = [], [], []
        jump_nodes = []          # (dof, sign, edge endpoint index or None)
        for t, sgn in sides:
            tri = list(mesh.elements[t])
            for i, v in enumerate(tri):
                dofs.append(3 * t + i)
                jump_int.append(sgn * h / 2 if v in (a, b) else 0.0)
                dn.append(avg * float(grads[t][i] @ n))
                jump_nodes.append((sgn, 0 if v == a else 1 if v == b else None))
        m = len(dofs)
        JJ = np.zeros((m, m))
        for r, (sr, er) in enumerate(jump_nodes):
            for s, (ss, es) in enumerate(jump_nodes):
                if er is not None and es is not None:
                    JJ[r, s] = sr * ss * h / 6 * (2 if er == es else 1)
        JG = np.outer(jump_int, dn)    # [test] {trial}
        local = -JG - theta * JG.T + penalty / h * JJ
        A[np.ix_(dofs, dofs)] += local
    return A


def _leggauss01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def bilinear_form_direct(mesh, degree, theta, penalty, w, v, npoints=6):
    """``A_h(w, v)`` by pointwise evaluation of the DG functions.

    ``w`` is the trial and ``v`` the test function, both given as
    callables ``(element, point, gradient) -> value or (value, grad)``.
    Element integrals use a tensor Gauss rule on the collapsed square,
    edge integrals a Gauss-Legendre rule; both are exact for the
    polynomial degrees involved.
    """
    s, ws = _leggauss01(npoints)
    total = 0.0
    for t in range(mesh.n_elements):
        p = mesh.vertices[mesh.elements[t]]
        d1, d2 = p[1] - p[0], p[2] - p[0]
        jac = abs(d1[0] * d2[1] - d1[1] * d2[0])
        for a, wa in zip(s, ws):
            for b, wb in zip(s, ws):
                # Duffy map of the unit square onto the reference triangle
                xi, eta = a, b * (1.0 - a)
                x = p[0] + xi * d1 + eta * d2
                _, gw = w(t, x, True)
                _, gv = v(t, x, True)
                total += wa * wb * (1.0 - a) * jac * float(gw @ gv)
    for (i, j), owners in _edge_table(mesh).items():
        P, Q = mesh.vertices[i], mesh.vertices[j]
        h = float(np.hypot(*(Q - P)))
        t0 = min(owners)
        opp = mesh.vertices[[k for k in mesh.elements[t0] if k not in (i, j)][0]]
        n = np.array([Q[1] - P[1], P[0] - Q[0]]) / h
        if n @ (opp - P) > 0:
            n = -n
        others = [t for t in owners if t != t0]
        for sq, wq in zip(s, ws):
            x = P + sq * (Q - P)
            w0, gw0 = w(t0, x, True)
            v0, gv0 = v(t0, x, True)
            if others:
                w1, gw1 = w(others[0], x, True)
                v1, gv1 = v(others[0], x, True)
                jw, jv = w0 - w1, v0 - v1
                aw, av = 0.5 * (gw0 + gw1) @ n, 0.5 * (gv0 + gv1) @ n
            else:
                jw, jv, aw, av = w0, v0, gw0 @ n, gv0 @ n
            total += wq * h * (-aw * jv - theta * av * jw + penalty / h * jw * jv)
    return total


def random_small_meshes(rng, count, max_elements=8):
    """Meshes with at most ``max_elements`` triangles obtained from a random
    perturbation of the unit square followed by random bisections.
    """
    from .mesh import Mesh, refine_nvb
    out = []
    while len(out) < count:
        base = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        base = base + 0.15 * rng.uniform(-1, 1, size=base.shape) * np.array(
            [[0, 0], [1, 0], [1, 1], [0, 1]])
        elems = np.array([[0, 1, 2], [0, 2, 3]])
        mesh = Mesh(base, elems, np.array([1, 2]), np.zeros(2, dtype=np.int64))
        while mesh.n_elements < max_elements and rng.uniform() < 0.8:
            cand = refine_nvb(mesh, [int(rng.integers(mesh.n_elements))])
            if cand.n_elements > max_elements:
                break
            mesh = cand
        out.append(mesh)
    return out


__all__ = [
    "monomial_integral", "polynomial_integral", "enumerate_obstacle_solution",
    "p1_closed_form_operator", "bilinear_form_direct", "random_small_meshes",
]
