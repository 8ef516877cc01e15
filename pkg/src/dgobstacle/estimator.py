"""Supremum-norm a posteriori error estimator for the DG obstacle problem."""
from dataclasses import dataclass

import numpy as np

from . import quadrature as quad
from .fespace import Geometry, basis, eval_linear, linear_coefficients, values_at

NEGATIVITY_TOL = 1e-9


class ConfigurationError(ValueError):
    pass


def edge_poly_max(p0, pm, p1):
    """Exact ``max |p|`` on [0, 1] of quadratics given at ``s = 0, 1/2, 1``.

    Arguments broadcast; linear and constant polynomials are included.
    """
    p0, pm, p1 = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (p0, pm, p1)))
    a = 2 * p0 - 4 * pm + 2 * p1
    b = -3 * p0 + 4 * pm - p1
    out = np.maximum(np.abs(p0), np.abs(p1))
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(a != 0, -b / (2 * a), -1.0)
    inside = (s > 0) & (s < 1)
    val = a * s * s + b * s + p0
    return np.where(inside, np.maximum(out, np.abs(val)), out)


_P2_REF = np.array([[0, 0], [1, 0], [0, 1], [0.5, 0.5], [0, 0.5], [0.5, 0]], dtype=float)
_MONO = np.column_stack([np.ones(6), _P2_REF[:, 0], _P2_REF[:, 1], _P2_REF[:, 0] ** 2,
                         _P2_REF[:, 0] * _P2_REF[:, 1], _P2_REF[:, 1] ** 2])
_MONO_INV = np.linalg.inv(_MONO)


def triangle_poly_max(values):
    """Exact ``max |p|`` over a triangle for P2 nodal values ``(..., 6)``.

    Candidates are the vertices, the extrema along the three edges, and the
    interior critical point when it lies inside. P1 input ``(..., 3)`` uses
    the vertices only.
    """
    v = np.asarray(values, dtype=float)
    if v.shape[-1] == 3:
        return np.abs(v).max(axis=-1)
    out = np.abs(v[..., :3]).max(axis=-1)
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        out = np.maximum(out, edge_poly_max(v[..., i], v[..., 3 + k], v[..., j]))
    c = v @ _MONO_INV.T   # 1, x, y, x^2, xy, y^2 on the reference element
    det = 4 * c[..., 3] * c[..., 5] - c[..., 4] ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        x = (-c[..., 1] * 2 * c[..., 5] + c[..., 4] * c[..., 2]) / det
        y = (-2 * c[..., 3] * c[..., 2] + c[..., 4] * c[..., 1]) / det
    inside = (det != 0) & (x > 0) & (y > 0) & (x + y < 1)
    x = np.where(inside, x, 0.0)
    y = np.where(inside, y, 0.0)
    val = c[..., 0] + c[..., 1] * x + c[..., 2] * y + c[..., 3] * x * x + c[..., 4] * x * y + c[..., 5] * y * y
    return np.where(inside, np.maximum(out, np.abs(val)), out)


def field_linf_max(field, geom, m=6, elements=None):
    """Lattice approximation (a lower bound) of ``max_T |field|`` per element."""
    lam = quad.lattice(m)
    coords = geom.coords if elements is None else geom.coords[elements]
    x = np.einsum("pa,tad->tpd", lam, coords)
    v = np.broadcast_to(np.asarray(field(x[..., 0], x[..., 1]), dtype=float), x.shape[:2])
    return np.abs(v).max(axis=1)


@dataclass(frozen=True, eq=False)
class EstimatorBreakdown:
    """Per-element estimator contributions and their global maxima."""

    e1: np.ndarray
    e2: np.ndarray
    e3: np.ndarray
    e4: np.ndarray
    osc: np.ndarray
    obsplus: np.ndarray
    obsneg: np.ndarray
    h_min: float
    kind: int

    @property
    def log_factor(self):
        return max(abs(np.log(self.h_min)), 1.0)

    @property
    def eta(self):
        """Global ``(eta1, eta2, eta3, eta4, eta5)``."""
        return tuple(float(a.max(initial=0.0)) for a in (self.e1, self.e2, self.e3, self.e4, self.osc))

    @property
    def eta_h(self):
        return global_estimate(self)[0]

    @property
    def indicators(self):
        return global_estimate(self)[1]


def edge_samples(mesh, topo, u, s, geom):
    """Values and normal derivatives of ``u`` at edge parameters ``s`` from both sides.

    Returns ``(values, dn)`` of shape ``(ne, ns, 2)``; side 1 is zero on
    boundary edges.
    """
    s = np.asarray(s, dtype=float)
    ne = topo.n_edges
    blocks = u.blocks()
    vals_out = np.zeros((ne, len(s), 2))
    dn_out = np.zeros((ne, len(s), 2))
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
        vals, dlam = basis(u.space.degree, lam)
        c = blocks[Tv]
        v = np.einsum("eqi,ei->eq", vals, c)
        grad = np.einsum("eqia,ei,ead->eqd", dlam, c, geom.grad_lam[Tv])
        d = np.einsum("eqd,ed->eq", grad, topo.normals)
        vals_out[:, :, side] = np.where(valid[:, None], v, 0.0)
        dn_out[:, :, side] = np.where(valid[:, None], d, 0.0)
    return vals_out, dn_out


def element_indicators(mesh, topo, u, multiplier, f, chi, kind, g=None, geom=None, m=6):
    """Per-element estimator contributions.

    Parameters
    ----------
    u : DGFunction
    multiplier : MultiplierField of kind ``kind``
    f, chi : vectorised fields ``(x, y) -> value``
    g : optional Dirichlet data; the boundary jump is ``u - g``
    m : lattice degree used for sup-norms of non-polynomial quantities
    """
    if multiplier.kind != kind:
        raise ConfigurationError(f"multiplier of kind {multiplier.kind} used with kind {kind}")
    if geom is None:
        geom = Geometry.of(mesh)
    nt = mesh.n_elements
    h2 = geom.h ** 2
    lam = quad.lattice(m)
    x = geom.to_physical(lam)
    fL = np.broadcast_to(np.asarray(f(x[..., 0], x[..., 1]), dtype=float), x.shape[:2])
    chiL = np.broadcast_to(np.asarray(chi(x[..., 0], x[..., 1]), dtype=float), x.shape[:2])
    uL = values_at(u, geom, lam)
    lap = (u.blocks() * geom.laplacians(u.space.degree)).sum(axis=1)

    if kind == 1:
        sigL = multiplier.sigma[:, None]
        e4 = np.zeros(nt)
    else:
        sigL = eval_linear(multiplier.sigma, lam)
        # a linear attains its extrema at the vertices of T
        vert = linear_coefficients(multiplier.sigma)
        e4 = h2 * np.abs(vert - multiplier.reduced[:, None]).max(axis=1)
    e1 = h2 * np.abs(lap[:, None] + fL - sigL).max(axis=1)
    osc = h2 * 0.5 * (fL.max(axis=1) - fL.min(axis=1))
    obsplus = np.maximum(chiL - uL, 0.0).max(axis=1)
    obsneg = np.where(multiplier.reduced < -NEGATIVITY_TOL, np.maximum(uL - chiL, 0.0).max(axis=1), 0.0)

    vals, dn = edge_samples(mesh, topo, u, [0.0, 0.5, 1.0], geom)
    inner = ~topo.boundary
    jump = vals[:, :, 0] - vals[:, :, 1]
    gjump = dn[:, :, 0] - dn[:, :, 1]
    jmax = edge_poly_max(jump[:, 0], jump[:, 1], jump[:, 2])
    bnd = np.flatnonzero(topo.boundary)
    if g is not None and bnd.size:
        s = np.linspace(0.0, 1.0, 2 * m + 1)
        bv, _ = edge_samples(mesh, topo, u, s, geom)
        p = mesh.vertices[topo.edges[bnd, 0]]
        q = mesh.vertices[topo.edges[bnd, 1]]
        pts = p[:, None, :] + s[None, :, None] * (q - p)[:, None, :]
        gv = np.broadcast_to(np.asarray(g(pts[..., 0], pts[..., 1]), dtype=float), pts.shape[:2])
        jmax[bnd] = np.abs(bv[bnd, :, 0] - gv).max(axis=1)
    gmax = np.where(inner, topo.lengths * edge_poly_max(gjump[:, 0], gjump[:, 1], gjump[:, 2]), 0.0)

    e2 = np.zeros(nt)
    e3 = np.zeros(nt)
    for side in range(2):
        T = topo.edge_elements[:, side]
        ok = T >= 0
        np.maximum.at(e2, T[ok], gmax[ok])
        np.maximum.at(e3, T[ok], jmax[ok])
    return EstimatorBreakdown(e1, e2, e3, e4, osc, obsplus, obsneg, float(geom.h.min()), kind)


def global_estimate(b):
    """Composite estimator and per-element marking indicators.

    ``eta_h = L (eta1 + eta2 + eta3 + (t - 1) eta4) + max (chi - u)^+ + max (u - chi)^+``
    with ``L = max(|ln h_min|, 1)``; the indicator of an element uses its own
    contributions in the same combination.
    """
    L = b.log_factor
    t1 = b.kind - 1
    eta1, eta2, eta3, eta4, _ = b.eta
    eta_h = L * (eta1 + eta2 + eta3 + t1 * eta4) + float(b.obsplus.max(initial=0.0)) \
        + float(b.obsneg.max(initial=0.0))
    local = L * (b.e1 + b.e2 + b.e3 + t1 * b.e4) + b.obsplus + b.obsneg
    return eta_h, local
