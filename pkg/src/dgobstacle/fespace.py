"""Discontinuous P1/P2 Lagrange spaces and the operators acting on them.

Local P2 node order: the three vertices, then the midpoints of local edges
0, 1, 2 (edge ``k`` is opposite vertex ``k``). Global dofs are element-major:
dof ``nloc * T + i`` is local node ``i`` of element ``T``.

Piecewise constants are plain ``(nt,)`` arrays. Piecewise linears are
``(nt, 3)`` arrays of values at the three quadrature-simplex vertices of each
element.
"""
from dataclasses import dataclass

import numpy as np

from . import quadrature as quad

# barycentric coordinates of the local Lagrange nodes
P1_NODES = np.eye(3)
P2_NODES = np.vstack([np.eye(3), 0.5 * (np.ones((3, 3)) - np.eye(3))])


class DegeneracyError(ValueError):
    """Singular local system on a degenerate element."""


@dataclass(frozen=True)
class SpaceDescriptor:
    degree: int
    n_elements: int

    def __post_init__(self):
        if self.degree not in (1, 2):
            raise ValueError("only degrees 1 and 2 are supported")

    @property
    def nloc(self):
        return 3 if self.degree == 1 else 6

    @property
    def ndofs(self):
        return self.nloc * self.n_elements

    @property
    def nodes(self):
        return P1_NODES if self.degree == 1 else P2_NODES

    def dofs(self, element):
        return np.arange(self.nloc * element, self.nloc * (element + 1))


@dataclass(frozen=True, eq=False)
class DGFunction:
    space: SpaceDescriptor
    coefficients: np.ndarray

    def __post_init__(self):
        if len(self.coefficients) != self.space.ndofs:
            raise ValueError("coefficient vector does not match the space")

    def blocks(self):
        return self.coefficients.reshape(self.space.n_elements, self.space.nloc)


def basis(degree, lam):
    """Lagrange basis in barycentric form.

    Parameters
    ----------
    degree : 1 or 2
    lam : (..., 3) barycentric coordinates

    Returns
    -------
    values : (..., nloc)
    dlam : (..., nloc, 3) partial derivatives with respect to each barycentric
        coordinate (treated as independent variables)
    """
    lam = np.asarray(lam, dtype=float)
    if degree == 1:
        values = lam.copy()
        dlam = np.broadcast_to(np.eye(3), lam.shape[:-1] + (3, 3)).copy()
        return values, dlam
    l0, l1, l2 = lam[..., 0], lam[..., 1], lam[..., 2]
    values = np.stack([
        l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
        4 * l1 * l2, 4 * l2 * l0, 4 * l0 * l1,
    ], axis=-1)
    z = np.zeros_like(l0)
    dlam = np.stack([
        np.stack([4 * l0 - 1, z, z], axis=-1),
        np.stack([z, 4 * l1 - 1, z], axis=-1),
        np.stack([z, z, 4 * l2 - 1], axis=-1),
        np.stack([z, 4 * l2, 4 * l1], axis=-1),
        np.stack([4 * l2, z, 4 * l0], axis=-1),
        np.stack([4 * l1, 4 * l0, z], axis=-1),
    ], axis=-2)
    return values, dlam


def basis_hessian_lam(degree):
    """Second barycentric derivatives ``(nloc, 3, 3)`` (constant per basis function)."""
    if degree == 1:
        return np.zeros((3, 3, 3))
    H = np.zeros((6, 3, 3))
    for i in range(3):
        H[i, i, i] = 4.0
    for k in range(3):
        j, l = (k + 1) % 3, (k + 2) % 3
        H[3 + k, j, l] = H[3 + k, l, j] = 4.0
    return H


@dataclass(frozen=True, eq=False)
class Geometry:
    """Vectorised affine data for all elements of a mesh."""

    coords: np.ndarray     # (nt, 3, 2)
    area: np.ndarray       # (nt,)
    h: np.ndarray          # (nt,) diameters
    grad_lam: np.ndarray   # (nt, 3, 2) gradients of barycentric coordinates

    @classmethod
    def of(cls, mesh):
        p = mesh.element_vertices()
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        if np.any(det <= 0):
            raise DegeneracyError("element with non-positive signed area")
        g1 = np.column_stack([d2[:, 1], -d2[:, 0]]) / det[:, None]
        g2 = np.column_stack([-d1[:, 1], d1[:, 0]]) / det[:, None]
        grad_lam = np.stack([-g1 - g2, g1, g2], axis=1)
        lengths = np.stack([np.linalg.norm(p[:, (k + 2) % 3] - p[:, (k + 1) % 3], axis=1)
                            for k in range(3)], axis=1)
        return cls(p, 0.5 * det, lengths.max(axis=1), grad_lam)

    def to_physical(self, lam):
        """Physical coordinates of barycentric points: ``(nt, npts, 2)``."""
        return np.einsum("pa,tad->tpd", np.atleast_2d(lam), self.coords)

    def basis_gradients(self, degree, lam):
        """Physical basis gradients at barycentric points: ``(nt, npts, nloc, 2)``."""
        _, dlam = basis(degree, np.atleast_2d(lam))
        return np.einsum("pia,tad->tpid", dlam, self.grad_lam)

    def laplacians(self, degree):
        """Constant Laplacian of each local basis function: ``(nt, nloc)``."""
        H = basis_hessian_lam(degree)
        gg = np.einsum("tad,tbd->tab", self.grad_lam, self.grad_lam)
        return np.einsum("iab,tab->ti", H, gg)


def barycentric_of(mesh_or_geom, element, point):
    """Barycentric coordinates of ``point`` with respect to ``element``."""
    p = mesh_or_geom.coords[element] if isinstance(mesh_or_geom, Geometry) \
        else mesh_or_geom.vertices[mesh_or_geom.elements[element]]
    A = np.array([[p[1, 0] - p[0, 0], p[2, 0] - p[0, 0]],
                  [p[1, 1] - p[0, 1], p[2, 1] - p[0, 1]]])
    l12 = np.linalg.solve(A, np.asarray(point, dtype=float) - p[0])
    return np.array([1.0 - l12.sum(), l12[0], l12[1]])


def eval_dg(u, mesh, element, point, gradient=False):
    """Evaluate the element-local polynomial of ``u`` at ``point``.

    No containment check is made. With ``gradient=True`` returns
    ``(value, grad)``.
    """
    lam = barycentric_of(mesh, element, point)
    vals, dlam = basis(u.space.degree, lam)
    c = u.blocks()[element]
    value = float(vals @ c)
    if not gradient:
        return value
    p = mesh.vertices[mesh.elements[element]]
    d1, d2 = p[1] - p[0], p[2] - p[0]
    det = d1[0] * d2[1] - d1[1] * d2[0]
    g1 = np.array([d2[1], -d2[0]]) / det
    g2 = np.array([-d1[1], d1[0]]) / det
    G = np.stack([-g1 - g2, g1, g2])
    grad = (c @ dlam) @ G
    return value, grad


def interpolate(mesh, degree, field):
    """Nodal interpolant of a vectorised scalar ``field(x, y)`` in the DG space."""
    space = SpaceDescriptor(degree, mesh.n_elements)
    geom = Geometry.of(mesh)
    x = geom.to_physical(space.nodes)
    fv = np.broadcast_to(np.asarray(field(x[..., 0], x[..., 1]), dtype=float), x.shape[:2])
    return DGFunction(space, fv.ravel().copy())


def values_at(u, geom, lam):
    """Values of ``u`` at barycentric points of every element: ``(nt, npts)``."""
    vals, _ = basis(u.space.degree, np.atleast_2d(lam))
    return u.blocks() @ vals.T


def q_h(mesh, v, geom=None):
    """Elementwise means ``Q_h v``.

    ``v`` is a DGFunction (exact), a vectorised field ``v(x, y)`` (degree-6
    rule, exact for polynomials up to degree 6), or a scalar constant.
    """
    if geom is None:
        geom = Geometry.of(mesh)
    if np.isscalar(v):
        return np.full(mesh.n_elements, float(v))
    pts, wts = quad.triangle_rule(6)
    if isinstance(v, DGFunction):
        return values_at(v, geom, pts) @ wts
    x = geom.to_physical(pts)
    fv = np.broadcast_to(np.asarray(v(x[..., 0], x[..., 1]), dtype=float), x.shape[:2])
    return fv @ wts


def conforming_node_ids(mesh, topo, degree):
    """Global conforming node id for every local dof, shape ``(nt, nloc)``.

    Vertices keep their vertex ids; the midpoint of edge ``e`` gets id
    ``nv + e``.
    """
    if degree == 1:
        return mesh.elements.copy()
    return np.hstack([mesh.elements, mesh.n_vertices + topo.element_edges])


def enrich_e_h(mesh, topo, u, boundary_values=None):
    """Averaging operator onto the conforming space.

    Interior conforming nodes receive the arithmetic mean of the traces of
    all elements containing them; boundary nodes receive 0 (or the values of
    ``boundary_values(x, y)`` when given).

    Returns
    -------
    (n_nodes,) array of node values, ordered by :func:`conforming_node_ids`.
    """
    deg = u.space.degree
    ids = conforming_node_ids(mesh, topo, deg)
    n_nodes = mesh.n_vertices + (topo.n_edges if deg == 2 else 0)
    total = np.zeros(n_nodes)
    count = np.zeros(n_nodes)
    np.add.at(total, ids.ravel(), u.coefficients)
    np.add.at(count, ids.ravel(), 1.0)
    out = total / count
    bnd = boundary_nodes(mesh, topo, deg)
    if boundary_values is None:
        out[bnd] = 0.0
    else:
        xy = node_coordinates(mesh, topo, deg)[bnd]
        out[bnd] = boundary_values(xy[:, 0], xy[:, 1])
    return out


def node_coordinates(mesh, topo, degree):
    if degree == 1:
        return mesh.vertices.copy()
    mids = 0.5 * (mesh.vertices[topo.edges[:, 0]] + mesh.vertices[topo.edges[:, 1]])
    return np.vstack([mesh.vertices, mids])


def boundary_nodes(mesh, topo, degree):
    """Boolean mask of conforming nodes on the domain boundary."""
    n = mesh.n_vertices + (topo.n_edges if degree == 2 else 0)
    mask = np.zeros(n, dtype=bool)
    be = np.flatnonzero(topo.boundary)
    mask[topo.edges[be].ravel()] = True
    if degree == 2:
        mask[mesh.n_vertices + be] = True
    return mask


def conforming_to_dg(mesh, topo, degree, node_values):
    """Embed conforming node values into the DG space."""
    ids = conforming_node_ids(mesh, topo, degree)
    return DGFunction(SpaceDescriptor(degree, mesh.n_elements), node_values[ids].ravel())


def local_mass_reference(degree):
    """Mass matrix on a triangle of unit area, ``(nloc, nloc)``."""
    pts, wts = quad.triangle_rule(6)
    vals, _ = basis(degree, pts)
    return (vals * wts[:, None]).T @ vals


def local_project_pi_h(mesh, v, degree=2, geom=None):
    """Elementwise L2 projection of a vectorised field ``v(x, y)`` onto P_degree.

    Solves the local mass system against moments of ``v`` computed with the
    degree-6 rule; this is the dual-basis projection.
    """
    if geom is None:
        geom = Geometry.of(mesh)
    M = local_mass_reference(degree)
    if np.linalg.cond(M) > 1e12:
        raise DegeneracyError("singular local mass matrix")
    pts, wts = quad.triangle_rule(6)
    vals, _ = basis(degree, pts)
    x = geom.to_physical(pts)
    fv = np.broadcast_to(np.asarray(v(x[..., 0], x[..., 1]), dtype=float), x.shape[:2])
    moments = (fv * wts) @ vals           # per unit area
    coeff = np.linalg.solve(M, moments.T).T
    return DGFunction(SpaceDescriptor(degree, mesh.n_elements), coeff.ravel())


def quadrature_nodes(mesh, element, s=2):
    """Quadrature simplex of ``element``: ``(points (3, 2), b, weight)``.

    The weight ``|T| / 3`` is shared by all three points.
    """
    p = mesh.vertices[mesh.elements[element]]
    lam = quad.simplex_barycentric(s)
    d1, d2 = p[1] - p[0], p[2] - p[0]
    area = 0.5 * abs(d1[0] * d2[1] - d1[1] * d2[0])
    return lam @ p, quad.simplex_shrink(s), area / 3.0


def integrate_simplex(values, mesh, element, s=2):
    """``|T| / 3 * sum(values)`` for values of p at the quadrature-simplex nodes."""
    _, _, w = quadrature_nodes(mesh, element, s)
    return w * float(np.sum(values))


QUAD_VERTEX_LAM = quad.simplex_barycentric(2)


def quadrature_layout(degree):
    """Barycentric nodes of the quadrature-simplex Lagrange layout.

    Degree 2: the three simplex vertices followed by the midpoints of the
    simplex edges opposite each vertex. Degree 1: the vertices only.
    """
    r = QUAD_VERTEX_LAM
    if degree == 1:
        return r.copy()
    mids = np.array([0.5 * (r[(k + 1) % 3] + r[(k + 2) % 3]) for k in range(3)])
    return np.vstack([r, mids])


def layout_change_of_basis(degree):
    """Standard coefficients of the quadrature-layout basis ``psi_z``.

    Returns ``C`` with ``psi_z = sum_i C[i, z] phi_i``. The matrix is the same
    on every element since the layout is defined in barycentric coordinates.
    """
    vals, _ = basis(degree, quadrature_layout(degree))
    # vals[k, i] = phi_i(q_k); psi_z(q_k) = delta_kz
    return np.linalg.inv(vals)


def pi_tilde_inverse(u, geom=None):
    """Values of ``u`` at the quadrature-simplex vertices: the P1 lumping map."""
    return u.blocks() @ basis(u.space.degree, QUAD_VERTEX_LAM)[0].T


def pi_tilde(sigma, degree=2):
    """Embed a piecewise linear (values at quadrature vertices) into ``W_h``."""
    C = layout_change_of_basis(degree)[:, :3]
    sigma = np.asarray(sigma)
    return DGFunction(SpaceDescriptor(degree, len(sigma)), (sigma @ C.T).ravel())


def linear_coefficients(sigma):
    """Barycentric coefficients of piecewise linears given at quadrature vertices.

    The linear ``L(lam) = sum_a c_a lam_a`` with ``L(r_k) = sigma_k``.
    """
    sigma = np.asarray(sigma, dtype=float)
    b = quad.simplex_shrink(2)
    mean = sigma.mean(axis=-1, keepdims=True)
    return mean + (sigma - mean) / b


def eval_linear(sigma, lam):
    """Evaluate piecewise linears at barycentric points: ``(nt, npts)``."""
    return linear_coefficients(sigma) @ np.atleast_2d(lam).T
