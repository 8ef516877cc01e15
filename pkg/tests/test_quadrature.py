import numpy as np
import pytest

from dgobstacle import quadrature as quad
from dgobstacle.oracles import monomial_integral

REF = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


@pytest.mark.parametrize("i,j", [(i, j) for i in range(7) for j in range(7 - i)])
def test_triangle_rule_exact_to_degree_six(i, j):
    pts, wts = quad.triangle_rule(6)
    T = np.array([[0.3, -0.2], [2.0, 0.4], [0.7, 1.9]])
    x = pts @ T
    area = 0.5 * abs(np.linalg.det(np.column_stack([T[1] - T[0], T[2] - T[0]])))
    got = area * wts @ (x[:, 0] ** i * x[:, 1] ** j)
    assert got == pytest.approx(float(monomial_integral(T, i, j)), rel=1e-12, abs=1e-13)


def test_triangle_rule_weights_and_points():
    pts, wts = quad.triangle_rule()
    assert len(wts) == 12
    assert wts.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.all(pts > 0) and np.allclose(pts.sum(axis=1), 1.0)
    with pytest.raises(ValueError):
        quad.triangle_rule(7)


def test_edge_rule_exact_to_degree_seven():
    s, w = quad.edge_rule(4)
    for k in range(8):
        assert w @ s ** k == pytest.approx(1.0 / (k + 1), rel=1e-14)


def test_lattice_size_and_vertices():
    lam = quad.lattice(6)
    assert lam.shape == (28, 3)
    assert np.allclose(lam.sum(axis=1), 1.0)
    for v in np.eye(3):
        assert np.any(np.all(np.isclose(lam, v), axis=1))
    with pytest.raises(ValueError):
        quad.lattice(0)


def test_simplex_shrink():
    assert quad.simplex_shrink(1) == 1.0
    assert quad.simplex_shrink(2) == 0.5
    assert np.allclose(quad.simplex_barycentric(1), np.eye(3))
    with pytest.raises(ValueError):
        quad.simplex_shrink(3)
