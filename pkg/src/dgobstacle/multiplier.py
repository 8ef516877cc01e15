"""Discrete Lagrange multipliers and contact classification."""
from dataclasses import dataclass

import numpy as np

from .fespace import Geometry, layout_change_of_basis
from .solver import residual_ext

NONCONTACT, CONTACT, FREE_BOUNDARY = 0, 1, 2


@dataclass(frozen=True, eq=False)
class MultiplierField:
    """Kind-``t`` multiplier and its piecewise constant reduction ``B_h sigma``.

    ``sigma`` is ``(nt,)`` for kind 1 and ``(nt, 3)`` (values at the
    quadrature-simplex vertices) for kind 2.
    """

    kind: int
    sigma: np.ndarray
    reduced: np.ndarray


def recover_sigma1(mesh, A, F, u, geom=None):
    """Piecewise constant multiplier from the algebraic residual.

    The coefficient vector of the element indicator is all ones on the
    element's block, so ``sigma_T = sum(residual block) / |T|``.
    """
    if geom is None:
        geom = Geometry.of(mesh)
    r = residual_ext(A, F, u).reshape(mesh.n_elements, -1)
    return (r.sum(axis=1) / geom.area).astype(float)


def recover_sigma2(mesh, A, F, u, degree=2, geom=None):
    """Piecewise linear multiplier at quadrature-simplex vertices.

    ``sigma(z) = 3 / |T| * (F - A u) . psi_z`` with ``psi_z`` the
    quadrature-layout Lagrange basis function of the vertex ``z``.
    """
    if geom is None:
        geom = Geometry.of(mesh)
    C = layout_change_of_basis(degree)[:, :3]
    r = residual_ext(A, F, u).reshape(mesh.n_elements, -1)
    return (3.0 * (r @ C.astype(np.longdouble)) / geom.area[:, None]).astype(float)


def reduce_b_h(kind, sigma):
    """``B_h sigma``: identity for kind 1, elementwise mean for kind 2."""
    sigma = np.asarray(sigma, dtype=float)
    if kind == 1:
        return sigma.copy()
    # the quadrature vertices are centroid-symmetric: the mean of a linear is its average there
    return sigma.mean(axis=1)


def recover(mesh, A, F, u, kind, degree, geom=None):
    if kind == 1:
        s = recover_sigma1(mesh, A, F, u, geom)
    else:
        s = recover_sigma2(mesh, A, F, u, degree, geom)
    return MultiplierField(kind, s, reduce_b_h(kind, s))


def constraint_gaps(K, u):
    """``B u - c`` arranged per element: ``(nt,)`` for kind 1, ``(nt, 3)`` for kind 2."""
    gap = K.B @ u - K.c
    return gap if K.kind == 1 else gap.reshape(-1, 3)


def classify(K, u, tol=1e-9, scale=None):
    """Contact labels per element.

    An equality holds when the gap is at most ``tol * max(1, |c|)`` (or
    ``tol * scale`` when given).
    """
    gap = constraint_gaps(K, u)
    c = K.c if K.kind == 1 else K.c.reshape(-1, 3)
    thr = tol * (np.maximum(1.0, np.abs(c)) if scale is None else scale)
    touch = gap <= thr
    if K.kind == 1:
        return np.where(touch, CONTACT, NONCONTACT)
    n_touch = touch.sum(axis=1)
    return np.select([n_touch == 3, n_touch == 0], [CONTACT, NONCONTACT], FREE_BOUNDARY)


def invariant_tolerance(F, rel=1e-9):
    return rel * max(1.0, float(np.max(np.abs(F))))


def multiplier_violations(field, K, u):
    """Largest violations of the multiplier sign and complementarity properties.

    Returns a dict of non-negative numbers (0 when the property holds
    exactly): the positive parts of ``sigma`` and ``B_h sigma`` and the
    largest product ``|sigma| * (B u - c)`` over constraint rows, divided by
    the obstacle scale ``max(1, |c|)`` of the row so that roundoff in
    ``sigma`` is not amplified by very large gaps.
    """
    gap = constraint_gaps(K, u)
    sigma = field.sigma
    c = K.c if K.kind == 1 else K.c.reshape(-1, 3)
    prod = np.abs(sigma * gap) / np.maximum(1.0, np.abs(c))
    return {
        "sign": max(0.0, float(sigma.max())),
        "reduced_sign": max(0.0, float(field.reduced.max())),
        "complementarity": float(prod.max()),
    }


def free_boundary_elements(mesh, topo, labels, kind):
    """Boolean mask of the discrete free boundary.

    For kind 2 these are the elements labelled ``FREE_BOUNDARY``. Kind-1
    labels have no such class, so contact elements sharing a vertex with a
    non-contact element are used instead.
    """
    labels = np.asarray(labels)
    if kind == 2:
        return labels == FREE_BOUNDARY
    non = labels == NONCONTACT
    vert_has_non = np.zeros(mesh.n_vertices, dtype=bool)
    vert_has_non[mesh.elements[non].ravel()] = True
    return (labels == CONTACT) & vert_has_non[mesh.elements].any(axis=1)


def element_layer(mesh, mask):
    """``mask`` grown by one layer of vertex neighbours."""
    touched = np.zeros(mesh.n_vertices, dtype=bool)
    touched[mesh.elements[np.asarray(mask, dtype=bool)].ravel()] = True
    return touched[mesh.elements].any(axis=1)
