import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dgobstacle.mesh import (Mesh, MeshError, TopologyError, build_rect_mesh, geometry_of,
                             min_angles, refine_nvb, topology, uniform_refine)


def test_unit_square_counts(square2):
    topo = topology(square2)
    assert square2.n_vertices == 4 and square2.n_elements == 2
    assert topo.n_edges == 5
    assert topo.boundary.sum() == 4 and topo.interior.sum() == 1


def test_example_domains():
    m1 = build_rect_mesh(-1.5, 1.5, -1.5, 1.5, 4, 4)
    m2 = build_rect_mesh(-2, 2, -1, 1, 4, 2)
    assert m1.n_elements == 32 and m1.areas().sum() == pytest.approx(9.0)
    assert m2.n_elements == 16 and m2.areas().sum() == pytest.approx(8.0)


def test_initial_refinement_edge_is_longest(ex1_mesh):
    from dgobstacle.mesh import edge_lengths
    L = edge_lengths(ex1_mesh)
    assert np.allclose(L[np.arange(32), ex1_mesh.ref_edge], L.max(axis=1))


@pytest.mark.parametrize("args", [(0, 0, 0, 1, 1, 1), (1, 0, 0, 1, 1, 1), (0, 1, 0, 1, 0, 1)])
def test_degenerate_rectangle(args):
    with pytest.raises(MeshError):
        build_rect_mesh(*args)


def test_single_triangle_topology(ref_mesh):
    topo = topology(ref_mesh)
    assert topo.n_edges == 3 and topo.boundary.all()


def test_euler_characteristic(ex1_mesh):
    topo = topology(ex1_mesh)
    assert ex1_mesh.n_vertices - topo.n_edges + ex1_mesh.n_elements == 1
    assert 2 * topo.interior.sum() + topo.boundary.sum() == 3 * ex1_mesh.n_elements


def test_topology_normals_and_lengths(ex1_mesh):
    topo = topology(ex1_mesh)
    v = ex1_mesh.vertices
    assert np.allclose(np.linalg.norm(topo.normals, axis=1), 1.0, atol=1e-12)
    assert np.allclose(topo.lengths, np.linalg.norm(v[topo.edges[:, 0]] - v[topo.edges[:, 1]], axis=1),
                       atol=1e-12)
    # normals point out of the lower-id element
    mid = v[topo.edges].mean(axis=1)
    cen = ex1_mesh.centroids()[topo.edge_elements[:, 0]]
    assert np.all(np.einsum("ij,ij->i", topo.normals, cen - mid) < 0)
    inner = topo.interior
    assert np.all(topo.edge_elements[inner, 0] < topo.edge_elements[inner, 1])


def test_patches(square2):
    topo = topology(square2)
    assert sorted(topo.patch(0)) == [0, 1]
    assert list(topo.patch(1)) == [0]


def test_hanging_node_detected():
    # unit square split in two, with one half split again through a midpoint that the other half lacks
    v = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]], dtype=float)
    el = np.array([[0, 1, 2], [0, 4, 3], [4, 2, 3]])
    mesh = Mesh(v, el, np.zeros(3, dtype=int), np.zeros(3, dtype=int), (0.0, 1.0, 0.0, 1.0))
    with pytest.raises(TopologyError, match="edge"):
        topology(mesh)


def test_overshared_edge_detected():
    v = np.array([[0, 0], [1, 0], [0, 1], [1, 1], [-1, 1]], dtype=float)
    el = np.array([[0, 1, 2], [1, 3, 2], [0, 2, 4], [1, 2, 0]])
    mesh = Mesh(v, el, np.zeros(4, dtype=int), np.zeros(4, dtype=int))
    with pytest.raises(TopologyError, match="more than two"):
        topology(mesh)


def test_geometry_of_reference_and_equilateral(ref_mesh):
    h, area, _, normals = geometry_of(ref_mesh, 0)
    assert h == pytest.approx(np.sqrt(2)) and area == pytest.approx(0.5)
    eq = Mesh(np.array([[0, 0], [1, 0], [0.5, np.sqrt(3) / 2]]), np.array([[0, 1, 2]]),
              np.array([0]), np.array([0]))
    h, area, p, normals = geometry_of(eq, 0)
    assert h == pytest.approx(1.0) and area == pytest.approx(np.sqrt(3) / 4)
    cen = p.mean(axis=0)
    for k in range(3):
        mid = 0.5 * (p[(k + 1) % 3] + p[(k + 2) % 3])
        assert normals[k] @ (cen - mid) < 0
    with pytest.raises(IndexError):
        geometry_of(eq, 1)


def test_refine_nothing_returns_same_mesh(square2):
    assert refine_nvb(square2, []) is square2


def test_refine_one_triangle_of_square(square2):
    # the shared diagonal is the refinement edge of both halves
    fine = refine_nvb(square2, [0])
    assert fine.n_elements == 4
    topology(fine)
    assert np.all(fine.generation == 1)
    assert fine.areas().sum() == pytest.approx(1.0, rel=1e-12)


def test_refine_all_of_32(ex1_mesh):
    fine = refine_nvb(ex1_mesh, range(32))
    assert 64 <= fine.n_elements <= 96
    assert np.all(np.bincount(fine.parent, minlength=32) >= 2)


def test_marked_out_of_range(square2):
    with pytest.raises(IndexError):
        refine_nvb(square2, [5])


def test_children_areas_sum_to_parent(ex1_mesh):
    fine = refine_nvb(ex1_mesh, [3, 17])
    parent_area = ex1_mesh.areas()
    child = np.bincount(fine.parent, weights=fine.areas(), minlength=32)
    assert np.allclose(child, parent_area, rtol=1e-12)


def test_generation_increments_by_one(square2):
    fine = refine_nvb(square2, [0])
    finer = refine_nvb(fine, [0])
    for t in range(finer.n_elements):
        p = finer.parent[t]
        assert finer.generation[t] - fine.generation[p] in (0, 1, 2)
    bisected_once = refine_nvb(square2, [1])
    assert np.all(bisected_once.generation == 1)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(0, 10_000), min_size=1, max_size=6), st.integers(1, 6))
def test_random_refinement_keeps_invariants(seeds, rounds):
    mesh = build_rect_mesh(-2, 2, -1, 1, 4, 2)
    floor = min_angles(uniform_refine(mesh, 2)).min()
    for r in range(rounds):
        marked = [s % mesh.n_elements for s in seeds]
        fine = refine_nvb(mesh, marked)
        topology(fine)
        assert np.all(fine.signed_areas() > 0)
        assert fine.areas().sum() == pytest.approx(8.0, rel=1e-12)
        assert min_angles(fine).min() >= floor - 1e-12
        assert fine.n_elements > mesh.n_elements
        mesh = fine
