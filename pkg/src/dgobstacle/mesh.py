"""Conforming triangulations of rectangles with newest vertex bisection.

Local conventions used throughout the package:

* elements are stored counter-clockwise;
* local edge ``k`` of an element is the edge opposite local vertex ``k``,
  i.e. it joins local vertices ``(k + 1) % 3`` and ``(k + 2) % 3``;
* the refinement edge of an element is stored as a local edge index, so the
  "newest vertex" of the element is the local vertex with that index.
"""
from dataclasses import dataclass, field

import numpy as np

MAX_BISECTIONS = 10_000_000


class MeshError(ValueError):
    """Invalid domain or mesh data."""


class TopologyError(MeshError):
    """The mesh is not a conforming triangulation."""


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangular mesh of a rectangle.

    Attributes
    ----------
    vertices : (nv, 2) float array
    elements : (nt, 3) int array, counter-clockwise
    ref_edge : (nt,) int array, local index of the refinement edge
    generation : (nt,) int array, number of bisections from the initial mesh
    bounds : (xmin, xmax, ymin, ymax) of the generating rectangle, or None
    parent : (nt,) int array, element id in the previous mesh (-1 if none)
    """

    vertices: np.ndarray
    elements: np.ndarray
    ref_edge: np.ndarray
    generation: np.ndarray
    bounds: tuple = None
    parent: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.parent is None:
            object.__setattr__(self, "parent", np.full(len(self.elements), -1, dtype=np.int64))
        for name in ("vertices", "elements", "ref_edge", "generation", "parent"):
            getattr(self, name).setflags(write=False)

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def n_vertices(self):
        return len(self.vertices)

    def element_vertices(self):
        """Coordinates of all element vertices, shape (nt, 3, 2)."""
        return self.vertices[self.elements]

    def signed_areas(self):
        p = self.element_vertices()
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def areas(self):
        return np.abs(self.signed_areas())

    def diameters(self):
        """Element diameters ``h_T`` (longest edge)."""
        return edge_lengths(self).max(axis=1)

    def centroids(self):
        return self.element_vertices().mean(axis=1)


def edge_lengths(mesh):
    """Lengths of the three local edges of every element, shape (nt, 3)."""
    p = mesh.element_vertices()
    out = np.empty((mesh.n_elements, 3))
    for k in range(3):
        out[:, k] = np.linalg.norm(p[:, (k + 2) % 3] - p[:, (k + 1) % 3], axis=1)
    return out


def _longest_edge(points):
    lengths = [np.linalg.norm(points[(k + 2) % 3] - points[(k + 1) % 3]) for k in range(3)]
    best = max(lengths)
    # ties: smallest opposite-vertex index, i.e. smallest local index
    for k in range(3):
        if np.isclose(lengths[k], best, rtol=1e-12, atol=0.0):
            return k
    return int(np.argmax(lengths))


def build_rect_mesh(xmin, xmax, ymin, ymax, nx, ny):
    """Structured triangulation of ``[xmin, xmax] x [ymin, ymax]``.

    Every cell is split along its lower-left to upper-right diagonal, giving
    ``2 * nx * ny`` triangles. Refinement edges start on the longest edge.
    """
    if not (xmax > xmin and ymax > ymin):
        raise MeshError(f"degenerate rectangle [{xmin}, {xmax}] x [{ymin}, {ymax}]")
    if nx < 1 or ny < 1:
        raise MeshError("nx and ny must be positive")
    xs = np.linspace(xmin, xmax, nx + 1)
    ys = np.linspace(ymin, ymax, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    elements = []
    for j in range(ny):
        for i in range(nx):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            elements.append((a, b, c))
            elements.append((a, c, d))
    elements = np.array(elements, dtype=np.int64)
    ref = np.array([_longest_edge(vertices[t]) for t in elements], dtype=np.int64)
    return Mesh(vertices, elements, ref, np.zeros(len(elements), dtype=np.int64),
                (float(xmin), float(xmax), float(ymin), float(ymax)))


@dataclass(frozen=True, eq=False)
class EdgeTopology:
    """Edge and vertex-patch index of a conforming mesh.

    Attributes
    ----------
    edges : (ne, 2) int array of sorted vertex pairs
    edge_elements : (ne, 2) int array; column 0 is the lower element id,
        column 1 the higher one or -1 on the boundary
    edge_local : (ne, 2) int array, local edge index within each adjacent element
    normals : (ne, 2) unit normals pointing out of ``edge_elements[:, 0]``
    lengths : (ne,) edge lengths ``h_e``
    boundary : (ne,) bool
    element_edges : (nt, 3) global edge id of each local edge
    patch_ptr, patch_elements : CSR layout of the element patch of each vertex
    """

    edges: np.ndarray
    edge_elements: np.ndarray
    edge_local: np.ndarray
    normals: np.ndarray
    lengths: np.ndarray
    boundary: np.ndarray
    element_edges: np.ndarray
    patch_ptr: np.ndarray
    patch_elements: np.ndarray

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def interior(self):
        return ~self.boundary

    def patch(self, vertex):
        """Element ids sharing ``vertex``."""
        return self.patch_elements[self.patch_ptr[vertex]:self.patch_ptr[vertex + 1]]


def topology(mesh):
    """Build the edge/patch index of ``mesh``.

    Raises
    ------
    TopologyError
        If an edge is shared by more than two elements, or a boundary edge
        does not lie on the boundary of the generating rectangle (a hanging
        node).
    """
    nt = mesh.n_elements
    el = mesh.elements
    # local edge k joins local vertices k+1 and k+2
    a = np.concatenate([el[:, (k + 1) % 3] for k in range(3)])
    b = np.concatenate([el[:, (k + 2) % 3] for k in range(3)])
    owner = np.tile(np.arange(nt), 3)
    local = np.repeat(np.arange(3), nt)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    keys = lo * np.int64(mesh.n_vertices) + hi
    order = np.lexsort((owner, keys))
    keys_s = keys[order]
    starts = np.flatnonzero(np.r_[True, keys_s[1:] != keys_s[:-1]])
    counts = np.diff(np.r_[starts, len(keys_s)])
    if np.any(counts > 2):
        bad = order[starts[np.argmax(counts > 2)]]
        raise TopologyError(f"edge ({lo[bad]}, {hi[bad]}) is shared by more than two elements")
    ne = len(starts)
    first = order[starts]
    second = np.where(counts == 2, order[np.minimum(starts + 1, len(order) - 1)], -1)

    edges = np.column_stack([lo[first], hi[first]])
    edge_elements = np.column_stack([owner[first], np.where(second >= 0, owner[second], -1)])
    edge_local = np.column_stack([local[first], np.where(second >= 0, local[second], -1)])
    boundary = counts == 1

    element_edges = np.empty((nt, 3), dtype=np.int64)
    edge_id = np.repeat(np.arange(ne), counts)
    element_edges[owner[order], local[order]] = edge_id

    # orientation from the lower element: outward normal of a ccw triangle
    t0, k0 = edge_elements[:, 0], edge_local[:, 0]
    p = mesh.vertices[el[t0, (k0 + 1) % 3]]
    q = mesh.vertices[el[t0, (k0 + 2) % 3]]
    d = q - p
    lengths = np.linalg.norm(d, axis=1)
    normals = np.column_stack([d[:, 1], -d[:, 0]]) / lengths[:, None]

    bnd = np.flatnonzero(boundary)
    deg = np.bincount(edges[bnd].ravel(), minlength=mesh.n_vertices)
    if np.any((deg != 0) & (deg != 2)):
        v = int(np.flatnonzero((deg != 0) & (deg != 2))[0])
        e = bnd[np.any(edges[bnd] == v, axis=1)][0]
        raise TopologyError(f"edge ({edges[e, 0]}, {edges[e, 1]}) is a non-conforming boundary edge")
    if mesh.bounds is not None:
        xmin, xmax, ymin, ymax = mesh.bounds
        tol = 1e-12 * max(xmax - xmin, ymax - ymin)
        ends = mesh.vertices[edges[bnd]]
        on = np.zeros(len(bnd), dtype=bool)
        for axis, lo_, hi_ in ((0, xmin, xmax), (1, ymin, ymax)):
            c = ends[:, :, axis]
            on |= np.all(np.abs(c - lo_) < tol, axis=1) | np.all(np.abs(c - hi_) < tol, axis=1)
        if not on.all():
            e = bnd[np.argmin(on)]
            raise TopologyError(
                f"edge ({edges[e, 0]}, {edges[e, 1]}) has one neighbour but is not on the domain boundary")

    vflat = el.ravel()
    tflat = np.repeat(np.arange(nt), 3)
    vorder = np.argsort(vflat, kind="stable")
    patch_elements = tflat[vorder]
    patch_ptr = np.zeros(mesh.n_vertices + 1, dtype=np.int64)
    np.add.at(patch_ptr, vflat + 1, 1)
    patch_ptr = np.cumsum(patch_ptr)

    return EdgeTopology(edges, edge_elements, edge_local, normals, lengths, boundary,
                        element_edges, patch_ptr, patch_elements)


def geometry_of(mesh, element):
    """Geometry of a single element.

    Returns
    -------
    h : float
        Diameter (longest edge).
    area : float
    coords : (3, 2) array
    normals : (3, 2) array
        Outward unit normal of each local edge.
    """
    if not 0 <= element < mesh.n_elements:
        raise IndexError(f"element id {element} out of range")
    p = mesh.vertices[mesh.elements[element]]
    normals = np.empty((3, 2))
    lengths = np.empty(3)
    for k in range(3):
        d = p[(k + 2) % 3] - p[(k + 1) % 3]
        lengths[k] = np.hypot(*d)
        normals[k] = (d[1], -d[0])
    normals /= lengths[:, None]
    d1, d2 = p[1] - p[0], p[2] - p[0]
    area = 0.5 * abs(d1[0] * d2[1] - d1[1] * d2[0])
    return lengths.max(), area, p.copy(), normals


def min_angles(mesh):
    """Smallest interior angle (radians) of each element."""
    p = mesh.element_vertices()
    out = np.full(mesh.n_elements, np.pi)
    for k in range(3):
        u = p[:, (k + 1) % 3] - p[:, k]
        v = p[:, (k + 2) % 3] - p[:, k]
        c = np.einsum("ij,ij->i", u, v) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        out = np.minimum(out, np.arccos(np.clip(c, -1.0, 1.0)))
    return out


def refine_nvb(mesh, marked):
    """Refine ``mesh`` by newest vertex bisection.

    Every marked element is bisected at its refinement edge and the
    conforming closure is computed on edges: any element with a marked edge
    also has its refinement edge marked. Elements are then bisected
    recursively until none of their edges carries a pending midpoint.

    Parameters
    ----------
    mesh : Mesh
    marked : iterable of int
        Element ids to refine.

    Returns
    -------
    Mesh
        The refined mesh (``mesh`` itself if nothing is marked).
    """
    marked = np.unique(np.asarray(list(marked), dtype=np.int64))
    if marked.size == 0:
        return mesh
    if marked.min() < 0 or marked.max() >= mesh.n_elements:
        raise IndexError("marked element id out of range")
    topo = topology(mesh)
    nt = mesh.n_elements
    ref_eid = topo.element_edges[np.arange(nt), mesh.ref_edge]
    edge_marked = np.zeros(topo.n_edges, dtype=bool)
    edge_marked[ref_eid[marked]] = True
    while True:
        need = edge_marked[topo.element_edges].any(axis=1) & ~edge_marked[ref_eid]
        if not need.any():
            break
        edge_marked[ref_eid[need]] = True

    marked_edges = np.flatnonzero(edge_marked)
    nv = mesh.n_vertices
    new_ids = nv + np.arange(len(marked_edges))
    mid = 0.5 * (mesh.vertices[topo.edges[marked_edges, 0]] + mesh.vertices[topo.edges[marked_edges, 1]])
    vertices = np.vstack([mesh.vertices, mid])
    midpoint = {(int(a), int(b)): int(m) for (a, b), m in zip(topo.edges[marked_edges], new_ids)}

    split = edge_marked[topo.element_edges].any(axis=1)
    keep = np.flatnonzero(~split)
    new_el = [mesh.elements[keep]]
    new_ref = [mesh.ref_edge[keep]]
    new_gen = [mesh.generation[keep]]
    new_parent = [keep]

    out_el, out_ref, out_gen, out_par = [], [], [], []
    count = 0
    for t in np.flatnonzero(split):
        stack = [(tuple(int(v) for v in mesh.elements[t]), int(mesh.ref_edge[t]), int(mesh.generation[t]))]
        while stack:
            tri, r, gen = stack.pop()
            p1, p2 = tri[(r + 1) % 3], tri[(r + 2) % 3]
            key = (min(p1, p2), max(p1, p2))
            m = midpoint.get(key)
            if m is None:
                out_el.append(tri)
                out_ref.append(r)
                out_gen.append(gen)
                out_par.append(t)
                continue
            count += 1
            if count > MAX_BISECTIONS:
                raise MeshError("bisection limit exceeded during conforming closure")
            p0 = tri[r]
            # both children keep ccw orientation; the new vertex is opposite their refinement edge
            stack.append(((p0, m, p2), 1, gen + 1))
            stack.append(((p0, p1, m), 2, gen + 1))

    if out_el:
        new_el.append(np.array(out_el, dtype=np.int64))
        new_ref.append(np.array(out_ref, dtype=np.int64))
        new_gen.append(np.array(out_gen, dtype=np.int64))
        new_parent.append(np.array(out_par, dtype=np.int64))
    return Mesh(vertices, np.concatenate(new_el), np.concatenate(new_ref),
                np.concatenate(new_gen), mesh.bounds, np.concatenate(new_parent))


def uniform_refine(mesh, times=1):
    """Bisect every element ``times`` times (each pass marks all elements)."""
    for _ in range(times):
        mesh = refine_nvb(mesh, range(mesh.n_elements))
    return mesh
