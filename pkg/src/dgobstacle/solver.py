"""Primal-dual active set solver for discrete obstacle problems.

The discrete variational inequality ``A_h(u, v - u) >= (f, v - u)`` over
``{B v >= c}`` is solved through its KKT system

    A u + B^T lam = F,   lam <= 0,   B u >= c,   lam * (B u - c) = 0.

With this sign convention ``lam`` has the sign of the discrete Lagrange
multiplier (non-positive for an obstacle from below).
"""
from dataclasses import dataclass
import logging

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Singular linear system inside the active set iteration."""


class NonConvergenceError(RuntimeError):
    """Active set iteration hit its iteration cap; ``result`` holds the last iterate."""

    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True, eq=False)
class PDASResult:
    u: np.ndarray
    lam: np.ndarray
    active: np.ndarray      # bool mask over constraint rows
    iterations: int
    converged: bool
    u_ext: np.ndarray = None    # long double refinement of ``u``

    @property
    def u_accurate(self):
        return self.u if self.u_ext is None else self.u_ext

    @property
    def active_rows(self):
        return np.flatnonzero(self.active)


def _factor(M):
    try:
        return spla.splu(sp.csc_matrix(M), permc_spec="COLAMD")
    except RuntimeError as exc:  # "Factor is exactly singular"
        raise SolverError(str(exc)) from exc


def matvec_ext(M, x):
    """``M @ x`` accumulated in long double; ``M`` is CSR."""
    M = sp.csr_matrix(M)
    prod = M.data.astype(np.longdouble) * np.asarray(x, dtype=np.longdouble)[M.indices]
    out = np.zeros(M.shape[0], dtype=np.longdouble)
    nonempty = np.diff(M.indptr) > 0
    out[nonempty] = np.add.reduceat(prod, M.indptr[:-1][nonempty]) if prod.size else 0
    return out


def residual_ext(A, F, u):
    """``F - A u`` in long double (``u`` may itself be long double)."""
    return np.asarray(F, dtype=np.longdouble) - matvec_ext(A, u)


def _saddle_system(A, B, c, F, active):
    rows = np.flatnonzero(active)
    if rows.size == 0:
        return sp.csc_matrix(A), np.asarray(F, dtype=float)
    BA = B[rows]
    K = sp.bmat([[A, BA.T], [BA, None]], format="csc")
    return K, np.concatenate([F, c[rows]])


def _saddle_solve(A, F, B, c, active):
    n = A.shape[0]
    K, rhs = _saddle_system(A, B, c, F, active)
    lu = _factor(K)
    x = lu.solve(rhs)
    if not np.all(np.isfinite(x)):
        raise SolverError("non-finite solution of the saddle point system")
    return x[:n], x[n:], (K, rhs, lu, x)


def _refine(system, steps):
    """Long double iterative refinement of a saddle solve."""
    K, rhs, lu, x = system
    K = sp.csr_matrix(K)
    b = rhs.astype(np.longdouble)
    xe = x.astype(np.longdouble)
    for _ in range(steps):
        xe = xe + lu.solve((b - matvec_ext(K, xe)).astype(float))
    return xe


def _finish(u, lam, active, it, system, refine):
    if not refine:
        return PDASResult(u, lam, active, it, True)
    xe = _refine(system, refine)
    n = len(u)
    lam = lam.copy()
    lam[active] = xe[n:].astype(float)
    return PDASResult(xe[:n].astype(float), lam, active, it, True, xe[:n])


def kkt_tolerance(F, rel=1e-10):
    return rel * max(1.0, float(np.max(np.abs(F))) if len(F) else 1.0)


def pdas_solve(A, F, K, c0=1.0, max_iter=200, initial_active=None, refine=2):
    """Solve the discrete obstacle problem by the primal-dual active set method.

    Parameters
    ----------
    A : sparse (n, n) operator, possibly nonsymmetric
    F : (n,) load vector
    K : ConstraintSystem
    c0 : positive weight of the primal residual in the active set predictor
    max_iter : iteration cap
    initial_active : optional bool mask; by default the rows violated by
        the unconstrained solution
    refine : long double iterative refinement steps on the final active
        set. The refined solution is kept in ``u_ext`` so that residuals
        such as ``F - A u`` can be evaluated beyond double precision.

    Raises
    ------
    NonConvergenceError
        If ``max_iter`` is exceeded.
    SolverError
        On a singular saddle point system.
    """
    B, c = K.B, K.c
    m = len(c)
    A = sp.csr_matrix(A)
    if initial_active is None:
        u0 = _factor(A).solve(F)
        active = (c - B @ u0) > 0
    else:
        active = np.asarray(initial_active, dtype=bool).copy()
    visited = set()
    lam = np.zeros(m)
    u = None
    for it in range(1, max_iter + 1):
        u, lam_a, system = _saddle_solve(A, F, B, c, active)
        lam = np.zeros(m)
        lam[active] = lam_a
        # with mu = -lam >= 0 the predictor reads mu + c0 (c - B u) > 0
        new_active = (-lam + c0 * (c - B @ u)) > 0
        if np.array_equal(new_active, active):
            return _finish(u, lam, active, it, system, refine)
        visited.add(active.tobytes())
        if new_active.tobytes() in visited:
            # damped step: keep the old status of the highest changed row
            diff = np.flatnonzero(new_active != active)
            new_active[diff[-1]] = active[diff[-1]]
            log.debug("active set cycle detected at iteration %d", it)
            if np.array_equal(new_active, active):
                return _finish(u, lam, active, it, system, refine)
        active = new_active
    raise NonConvergenceError(f"PDAS did not converge in {max_iter} iterations",
                              PDASResult(u, lam, active, max_iter, False))


def check_kkt(A, F, K, result, rel=1e-10):
    """Worst violations ``(dual sign, feasibility, complementarity)`` scaled by the tolerance.

    Values at most 1 mean the invariant holds.
    """
    tol = kkt_tolerance(F, rel)
    gap = K.B @ result.u - K.c
    sign = max(0.0, float(result.lam.max(initial=0.0))) / tol
    feas = max(0.0, float(-gap.min(initial=0.0))) / tol
    comp = float(np.abs(result.lam * gap).max(initial=0.0)) / (tol * max(1.0, float(np.max(np.abs(F)))))
    return sign, feas, comp


class FeasibilityError(ValueError):
    pass


def _project_feasible(K, v, layout=None):
    """Push ``v`` into ``{B v >= c}`` by local corrections.

    Kind 1 adds a constant on each violating element (rows have unit sum
    and disjoint support). Kind 2 adds multiples of the quadrature-layout
    basis functions, which are dual to the rows.
    """
    viol = np.maximum(0.0, K.c - K.B @ v)
    if not viol.any():
        return v
    v = v.copy()
    nloc = K.B.shape[1] // (K.row_element.max() + 1)
    if K.kind == 1:
        v += np.repeat(viol, nloc)
        return v
    if layout is None:
        raise ValueError("kind-2 projection needs the layout change of basis")
    T = K.row_element.reshape(-1, 3)[:, 0]
    corr = viol.reshape(-1, 3) @ layout[:, :3].T
    blocks = v.reshape(-1, nloc)
    blocks[T] += corr
    return v


def vi_residual_check(A, F, K, u, probes=20, seed=0, layout=None, scale=1e-2):
    """Largest observed violation of the variational inequality.

    Draws feasible test vectors ``v`` near ``u`` (antithetic random
    perturbations pushed back into the feasible set) and returns
    ``max_v (F - A u) . (v - u)``, which is <= 0 for the exact solution.
    """
    tol = kkt_tolerance(F)
    if np.any(K.B @ u - K.c < -tol):
        raise FeasibilityError("u violates the constraints")
    if probes <= 0:
        return 0.0
    rng = np.random.default_rng(seed)
    r = F - A @ u
    size = scale * max(1.0, float(np.max(np.abs(u))))
    worst = -np.inf
    for k in range(probes):
        if k % 2 == 0:
            d = rng.standard_normal(len(u)) * size
        v = _project_feasible(K, u + (d if k % 2 == 0 else -d), layout)
        worst = max(worst, float(r @ (v - u)))
    return worst
