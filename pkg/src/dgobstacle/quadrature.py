"""Quadrature rules on triangles and edges.

All triangle rules are given in barycentric coordinates with weights
normalised to sum to one, so that ``sum(w * f(points)) * area`` integrates
``f`` over a triangle of the given area.
"""
import numpy as np

# Symmetric 12-point rule, exact for polynomials of degree <= 6.
_D6_ORBITS = [
    # (weight, barycentric triple generating the orbit)
    (0.116786275726379, (0.249286745170910, 0.249286745170910, 0.501426509658179)),
    (0.050844906370207, (0.063089014491502, 0.063089014491502, 0.873821971016996)),
    (0.082851075618374, (0.053145049844817, 0.310352451033784, 0.636502499121399)),
]


def _orbit(triple):
    a, b, c = triple
    pts = {(a, b, c), (b, c, a), (c, a, b), (a, c, b), (c, b, a), (b, a, c)}
    return sorted(pts)


def _build_rule(orbits):
    pts, wts = [], []
    for w, triple in orbits:
        for p in _orbit(triple):
            pts.append(p)
            wts.append(w)
    pts = np.array(pts, dtype=float)
    wts = np.array(wts, dtype=float)
    return pts, wts / wts.sum()


TRI6_POINTS, TRI6_WEIGHTS = _build_rule(_D6_ORBITS)


def triangle_rule(degree=6):
    """Return ``(barycentric points (n, 3), weights (n,))`` for a triangle.

    Only the degree-6 rule is tabulated; lower degrees reuse it.
    """
    if degree > 6:
        raise ValueError("no triangle rule tabulated above degree 6")
    return TRI6_POINTS, TRI6_WEIGHTS


def edge_rule(npoints=4):
    """Gauss-Legendre rule on [0, 1]: ``(nodes, weights)`` with weights summing to one."""
    x, w = np.polynomial.legendre.leggauss(npoints)
    return 0.5 * (x + 1.0), 0.5 * w


def lattice(m):
    """Barycentric lattice of degree ``m`` (all points ``(i, j, k) / m``).

    Contains ``(m + 1)(m + 2) / 2`` points including the vertices.
    """
    if m < 1:
        raise ValueError("lattice degree must be >= 1")
    pts = [(m - i - j, i, j) for i in range(m + 1) for j in range(m + 1 - i)]
    return np.array(pts, dtype=float) / m


def simplex_shrink(s, d=2):
    """Shrink factor ``b`` of the quadrature simplex for exactness order ``s``."""
    if s == 1:
        return 1.0
    if s == 2:
        return 1.0 / np.sqrt(d + 2.0)
    raise ValueError("quadrature simplex order must be 1 or 2")


def simplex_barycentric(s, d=2):
    """Barycentric coordinates (rows) of the quadrature-simplex vertices ``r_i = b x_i + (1-b) G``."""
    b = simplex_shrink(s, d)
    return b * np.eye(d + 1) + (1.0 - b) / (d + 1.0)
