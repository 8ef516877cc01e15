"""Interior penalty DG operator, load vector and obstacle constraints."""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import quadrature as quad
from .fespace import Geometry, QUAD_VERTEX_LAM, SpaceDescriptor, basis, q_h

METHODS = {"sipg": 1, "iipg": 0, "nipg": -1}
DEFAULT_PENALTY = {1: 45.0, 0: 30.0, -1: 20.0}


@dataclass(frozen=True)
class MethodConfig:
    """DG method parameters.

    ``theta`` is 1 (SIPG), 0 (IIPG) or -1 (NIPG); ``kind`` selects integral
    (1) or quadrature-point (2) constraints.
    """

    theta: int = 1
    penalty: float = None
    degree: int = 1
    kind: int = 1

    def __post_init__(self):
        if self.theta not in (-1, 0, 1):
            raise ValueError("theta must be -1, 0 or 1")
        if self.penalty is None:
            object.__setattr__(self, "penalty", DEFAULT_PENALTY[self.theta])
        if not self.penalty > 0:
            raise ValueError("penalty must be positive")
        if self.degree not in (1, 2):
            raise ValueError("degree must be 1 or 2")
        if self.kind not in (1, 2):
            raise ValueError("constraint kind must be 1 or 2")

    @classmethod
    def from_names(cls, method="sipg", degree=1, constraints="integral", penalty=None):
        kind = {"integral": 1, "quadrature": 2}[constraints]
        return cls(METHODS[method], penalty, degree, kind)

    @property
    def method(self):
        return {1: "sipg", 0: "iipg", -1: "nipg"}[self.theta]


@dataclass(frozen=True, eq=False)
class EdgeTraces:
    """Basis traces on the edge quadrature points of every edge.

    ``values[s]`` and ``dn[s]`` have shape ``(ne, nq, nloc)`` and hold basis
    values and normal derivatives (along ``topo.normals``) from side ``s``;
    side 1 is zero on boundary edges. ``points`` is ``(ne, nq, 2)``.
    """

    points: np.ndarray
    weights: np.ndarray
    values: tuple
    dn: tuple
    lam: tuple


def edge_traces(mesh, topo, degree, geom=None, npoints=4):
    if geom is None:
        geom = Geometry.of(mesh)
    s, w = quad.edge_rule(npoints)
    p = mesh.vertices[topo.edges[:, 0]]
    q = mesh.vertices[topo.edges[:, 1]]
    points = p[:, None, :] + s[None, :, None] * (q - p)[:, None, :]
    ne = topo.n_edges
    nloc = 3 if degree == 1 else 6
    values, dn, lams = [], [], []
    for side in range(2):
        T = topo.edge_elements[:, side]
        valid = T >= 0
        Tv = np.where(valid, T, 0)
        el = mesh.elements[Tv]
        ia = np.argmax(el == topo.edges[:, [0]], axis=1)
        ib = np.argmax(el == topo.edges[:, [1]], axis=1)
        lam = np.zeros((ne, len(s), 3))
        rows = np.arange(ne)
        lam[rows, :, ia] = (1.0 - s)[None, :]
        lam[rows, :, ib] += s[None, :]
        vals, dlam = basis(degree, lam)
        grads = np.einsum("eqia,ead->eqid", dlam, geom.grad_lam[Tv])
        d = np.einsum("eqid,ed->eqi", grads, topo.normals)
        mask = valid[:, None, None]
        values.append(np.where(mask, vals, 0.0))
        dn.append(np.where(mask, d, 0.0))
        lams.append(lam)
    assert values[0].shape[-1] == nloc
    return EdgeTraces(points, w, tuple(values), tuple(dn), tuple(lams))


def _element_dofs(T, nloc):
    return nloc * T[:, None] + np.arange(nloc)[None, :]


def stiffness_blocks(geom, degree):
    """Broken stiffness matrices ``(nt, nloc, nloc)``."""
    pts, wts = quad.triangle_rule(6)
    g = geom.basis_gradients(degree, pts)
    return np.einsum("q,tqid,tqjd->tij", wts, g, g) * geom.area[:, None, None]


def edge_blocks(topo, traces, theta, penalty):
    """Local matrices of the edge form for interior and boundary edges.

    Returns ``(interior (ni, 2n, 2n), boundary (nb, n, n))`` with rows indexing
    test functions and columns trial functions.
    """
    w = traces.weights
    scale = topo.lengths
    inner = ~topo.boundary
    V0, V1 = traces.values
    D0, D1 = traces.dn

    J = np.concatenate([V0[inner], -V1[inner]], axis=2)
    G = 0.5 * np.concatenate([D0[inner], D1[inner]], axis=2)
    he = topo.lengths[inner]
    Ai = _edge_form(J, G, w, scale[inner], theta, penalty / he)

    bnd = topo.boundary
    Ab = _edge_form(V0[bnd], D0[bnd], w, scale[bnd], theta, penalty / topo.lengths[bnd])
    return Ai, Ab


def _edge_form(J, G, w, length, theta, pen):
    JG = np.einsum("q,eqi,eqj->eij", w, J, G)
    JJ = np.einsum("q,eqi,eqj->eij", w, J, J)
    # row i = test, column j = trial: -{grad w}[v] - theta {grad v}[w] + pen [w][v]
    A = -JG - theta * np.transpose(JG, (0, 2, 1)) + pen[:, None, None] * JJ
    return A * length[:, None, None]


def assemble_operator(mesh, topo, space, cfg, geom=None, traces=None):
    """Sparse matrix of ``A_h(w, v) = a_h(w, v) + b_h(w, v)``.

    ``A[i, j] = A_h(phi_j, phi_i)``: rows are test functions, so the discrete
    problem reads ``A u = F`` in the unconstrained case.
    """
    if geom is None:
        geom = Geometry.of(mesh)
    if traces is None:
        traces = edge_traces(mesh, topo, space.degree, geom)
    n = space.nloc
    K = stiffness_blocks(geom, space.degree)
    Ai, Ab = edge_blocks(topo, traces, cfg.theta, cfg.penalty)

    rows, cols, vals = [], [], []

    def scatter(dofs, blocks):
        rows.append(np.repeat(dofs, dofs.shape[1], axis=1).ravel())
        cols.append(np.tile(dofs, (1, dofs.shape[1])).ravel())
        vals.append(blocks.ravel())

    scatter(_element_dofs(np.arange(mesh.n_elements), n), K)
    inner = ~topo.boundary
    ei = topo.edge_elements[inner]
    scatter(np.hstack([_element_dofs(ei[:, 0], n), _element_dofs(ei[:, 1], n)]), Ai)
    scatter(_element_dofs(topo.edge_elements[topo.boundary, 0], n), Ab)

    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(space.ndofs, space.ndofs))
    return A.tocsr()


def assemble_load(mesh, space, f, topo=None, cfg=None, g=None, geom=None, traces=None):
    """Load vector ``(f, phi_i)``.

    With Dirichlet data ``g`` (and ``topo``, ``cfg``) the consistent boundary
    terms ``-theta (grad phi_i . n, g)_e + (penalty / h_e) (g, phi_i)_e`` are
    added on every boundary edge.
    """
    if geom is None:
        geom = Geometry.of(mesh)
    pts, wts = quad.triangle_rule(6)
    vals, _ = basis(space.degree, pts)
    x = geom.to_physical(pts)
    fv = np.broadcast_to(np.asarray(f(x[..., 0], x[..., 1]), dtype=float), x.shape[:2])
    F = ((fv * wts) @ vals) * geom.area[:, None]
    F = F.ravel()
    if g is None:
        return F
    if topo is None or cfg is None:
        raise ValueError("boundary data needs the topology and method config")
    if traces is None:
        traces = edge_traces(mesh, topo, space.degree, geom)
    bnd = topo.boundary
    pts_e = traces.points[bnd]
    gv = np.broadcast_to(np.asarray(g(pts_e[..., 0], pts_e[..., 1]), dtype=float), pts_e.shape[:2])
    pen = cfg.penalty / topo.lengths[bnd]
    V, D = traces.values[0][bnd], traces.dn[0][bnd]
    contrib = np.einsum("q,eq,eqi->ei", traces.weights, gv, -cfg.theta * D + pen[:, None, None] * V)
    contrib *= topo.lengths[bnd][:, None]
    dofs = _element_dofs(topo.edge_elements[bnd, 0], space.nloc)
    np.add.at(F, dofs.ravel(), contrib.ravel())
    return F


@dataclass(frozen=True, eq=False)
class ConstraintSystem:
    """Linear inequality constraints ``B u >= c``.

    Attributes
    ----------
    kind : 1 (elementwise means) or 2 (values at quadrature-simplex vertices)
    B : (nrows, ndofs) CSR matrix
    c : (nrows,) thresholds
    row_element : (nrows,) element of each row
    row_vertex : (nrows,) local quadrature vertex (kind 2) or -1
    """

    kind: int
    B: sp.csr_matrix
    c: np.ndarray
    row_element: np.ndarray
    row_vertex: np.ndarray

    @property
    def nrows(self):
        return len(self.c)


def mean_weights(degree):
    """``Q_T(phi_i)`` for the local basis (independent of the element)."""
    pts, wts = quad.triangle_rule(6)
    vals, _ = basis(degree, pts)
    return wts @ vals


def build_constraints(mesh, space, cfg, chi, geom=None):
    """Constraint system realising the discrete convex set of kind ``cfg.kind``."""
    if geom is None:
        geom = Geometry.of(mesh)
    nt, n = mesh.n_elements, space.nloc
    dofs = _element_dofs(np.arange(nt), n)
    if cfg.kind == 1:
        wrow = mean_weights(space.degree)
        wrow[np.abs(wrow) < 1e-15] = 0.0
        B = sp.csr_matrix((np.tile(wrow, nt), dofs.ravel(), n * np.arange(nt + 1)),
                          shape=(nt, space.ndofs))
        B.eliminate_zeros()
        c = chi_means(mesh, chi, geom)
        return ConstraintSystem(1, B, c, np.arange(nt), np.full(nt, -1))
    vals, _ = basis(space.degree, QUAD_VERTEX_LAM)   # (3, n)
    data = np.tile(vals.ravel(), nt)
    cols = np.repeat(dofs, 3, axis=0).ravel()
    B = sp.csr_matrix((data, cols, n * np.arange(3 * nt + 1)), shape=(3 * nt, space.ndofs))
    x = geom.to_physical(QUAD_VERTEX_LAM)
    c = np.broadcast_to(np.asarray(chi(x[..., 0], x[..., 1]), dtype=float), (nt, 3)).ravel()
    return ConstraintSystem(2, B, c.copy(), np.repeat(np.arange(nt), 3), np.tile(np.arange(3), nt))


def chi_means(mesh, chi, geom=None):
    vals = q_h(mesh, chi, geom)
    return np.broadcast_to(vals, (mesh.n_elements,)).astype(float).copy()


def space_for(mesh, cfg):
    return SpaceDescriptor(cfg.degree, mesh.n_elements)
