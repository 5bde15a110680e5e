"""High-accuracy reference solutions, written without the library's prox or subdifferential code.

These exist to cross-check the solvers, so they deliberately re-derive
thresholding, projections and optimality residuals from scratch.
"""

import numpy as np
from scipy.optimize import linprog

from .errors import SolverError

__all__ = [
    "lasso_residual",
    "solve_lasso",
    "solve_nonneg_lasso",
    "solve_basis_pursuit",
    "lasso_multiplier",
]


def _shrink(v, t):
    # v - clip(v, -t, t) equals the soft threshold
    return v - np.clip(v, -t, t)


def lasso_residual(A, c, lam, x, nonneg=False):
    """Optimality residual of ``1/2||Ax - c||^2 + lam ||x||_1`` (optionally with ``x >= 0``)."""
    g = A.T @ (A @ x - c)
    r = np.empty_like(x)
    on = x != 0
    if nonneg:
        if np.any(x < 0):
            return np.inf
        r[on] = g[on] + lam
        r[~on] = np.minimum(g[~on] + lam, 0.0)
    else:
        r[on] = g[on] + lam * np.sign(x[on])
        r[~on] = np.maximum(np.abs(g[~on]) - lam, 0.0)
    return float(np.sqrt(np.sum(r * r)))


def _fista(A, c, lam, nonneg, tol, max_iter):
    L = float(np.linalg.svd(A, compute_uv=False)[0] ** 2)
    if L == 0.0:
        return np.zeros(A.shape[1])
    step = 1.0 / L
    x = np.zeros(A.shape[1])
    x_prev = x.copy()
    t = 1.0
    for _ in range(max_iter):
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        w = x + ((t - 1.0) / t_next) * (x - x_prev)
        v = w - step * (A.T @ (A @ w - c))
        if nonneg:
            x_new = np.maximum(v - step * lam, 0.0)
        else:
            x_new = _shrink(v, step * lam)
        if np.dot(w - x_new, x_new - x) > 0:
            t_next = 1.0
        x_prev, x, t = x, x_new, t_next
        if lasso_residual(A, c, lam, x, nonneg) <= tol:
            return x
    res = lasso_residual(A, c, lam, x, nonneg)
    raise SolverError(f"reference solver stalled at residual {res:.3g} > {tol:g}")


def solve_lasso(A, c, lam, tol=1e-10, max_iter=500000):
    """Accelerated proximal gradient with restart, stopped once the residual is at most `tol`."""
    return _fista(np.asarray(A, float), np.asarray(c, float), float(lam), False, tol, max_iter)


def solve_nonneg_lasso(A, c, lam, tol=1e-10, max_iter=500000):
    return _fista(np.asarray(A, float), np.asarray(c, float), float(lam), True, tol, max_iter)


def lasso_multiplier(A, c, x):
    """``-A^T (A x - c)``: the multiplier of the split ``x1 - x2 = 0``."""
    return -(A.T @ (A @ x - c))


def solve_basis_pursuit(A, c, support_tol=1e-9):
    """``min ||x||_1  s.t.  A x = c`` via HiGHS, polished on the detected support.

    Returns ``(x, nu)`` where ``A^T nu`` lies in the subdifferential of the
    l1 norm at ``x`` (``nu`` is the equality marginal).
    """
    A = np.asarray(A, float)
    c = np.asarray(c, float)
    p, n = A.shape
    res = linprog(
        np.ones(2 * n),
        A_eq=np.hstack([A, -A]),
        b_eq=c,
        bounds=[(0, None)] * (2 * n),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise SolverError(f"linprog failed: {res.message}")
    x = res.x[:n] - res.x[n:]
    nu = np.asarray(res.eqlin.marginals, float)
    S = np.abs(x) > support_tol * max(1.0, np.abs(x).max())
    x = np.zeros(n)
    x[S] = np.linalg.lstsq(A[:, S], c, rcond=None)[0]
    s = np.sign(x[S])
    # smallest correction making (A^T nu)_S equal to sign(x_S)
    nu = nu + np.linalg.lstsq(A[:, S].T, s - A[:, S].T @ nu, rcond=None)[0]
    return x, nu
