"""Two-block ADMM with a relaxed dual step and its convergence certificates.

Solves ``min f1(x1) + f2(x2)  s.t.  A1 x1 + A2 x2 = b`` through the
augmented Lagrangian
``L(x1, x2, y) = f1 + f2 + <y, r> + rho/2 ||r||^2`` with
``r = A1 x1 + A2 x2 - b``::

    x1+ = argmin_x1 L(x1, x2, y)
    x2+ = argmin_x2 L(x1+, x2, y)
    y+  = y + tau * rho * (A1 x1+ + A2 x2+ - b)

with ``rho > 0`` and ``0 < tau < (1 + sqrt 5)/2``.

Each block function is ``atom + smooth`` (the smooth part optional).
Subproblems must have unique minimizers; this is enforced when the
problem is built.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .core import LinOp, as_vec, smallest_singular_value
from .errors import DimensionError, ParameterError, PreconditionError, SubproblemError
from .prox import Zero, is_infinite, prox
from .report import FAIL, INCONCLUSIVE, PASS, VACUOUS, CheckReport, violation_message
from .subdiff import StructuredFn, distance_to_subdiff, subdiff_distance

__all__ = [
    "GOLDEN",
    "AdmmProblem",
    "AdmmConfig",
    "AdmmTrace",
    "AuxSequences",
    "KKTResult",
    "solver_modes",
    "solve_x1_subproblem",
    "solve_x2_subproblem",
    "run_admm",
    "check_dual_update",
    "compute_aux",
    "check_uv_membership",
    "descent_coefficients",
    "check_phi_descent",
    "check_phi_monotone",
    "check_summability",
    "kkt_check",
    "check_convergence_to_kkt",
    "TAGS",
]

GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0
RANK_TOL = 1e-10

TAGS = {
    "phi": "Φ_isdescending",
    "uv": "u_inthesubgradient",
    "kkt": "ADMM_convergence",
    "kkt_point": "Convex_KKT",
}


def _as_op(A):
    return A if isinstance(A, LinOp) else LinOp(A)


@dataclass(frozen=True)
class AdmmProblem:
    """``min (f1 + smooth1)(x1) + (f2 + smooth2)(x2)  s.t.  A1 x1 + A2 x2 = b``."""

    f1: object
    f2: object
    A1: LinOp
    A2: LinOp
    b: np.ndarray
    smooth1: object = None
    smooth2: object = None
    feasible_point: tuple = None

    def __post_init__(self):
        A1, A2 = _as_op(self.A1), _as_op(self.A2)
        object.__setattr__(self, "A1", A1)
        object.__setattr__(self, "A2", A2)
        if A1.rows != A2.rows:
            raise DimensionError(f"A1 has {A1.rows} rows but A2 has {A2.rows}")
        object.__setattr__(self, "b", as_vec(self.b, A1.rows, "b"))
        for i in (1, 2):
            self._check_unique(i)

    def _check_unique(self, i):
        atom = getattr(self, f"f{i}")
        smooth = getattr(self, f"smooth{i}")
        A = getattr(self, f"A{i}")
        if smallest_singular_value(A) > RANK_TOL or atom.strictly_convex:
            return
        if smooth is not None and smooth.hessian is not None:
            if np.linalg.eigvalsh(smooth.hessian)[0] > RANK_TOL:
                return
        raise ParameterError(
            f"A{i}",
            f"subproblem {i} may have several minimizers: A{i}^T A{i} is singular and "
            f"f{i} is not strictly convex",
        )

    @property
    def n(self):
        return self.A1.cols

    @property
    def m(self):
        return self.A2.cols

    @property
    def p(self):
        return self.A1.rows

    @property
    def F1(self):
        return StructuredFn(self.f1, self.smooth1)

    @property
    def F2(self):
        return StructuredFn(self.f2, self.smooth2)

    @property
    def full_rank(self):
        """A1, A2 have full column rank and ``[A1 A2]`` full row rank (unique multiplier)."""
        if smallest_singular_value(self.A1) <= RANK_TOL or smallest_singular_value(self.A2) <= RANK_TOL:
            return False
        joint = np.hstack([self.A1.matrix, self.A2.matrix])
        return smallest_singular_value(LinOp(joint.T)) > RANK_TOL

    def residual(self, x1, x2):
        return self.A1.apply(x1) + self.A2.apply(x2) - self.b

    def objective(self, x1, x2):
        v1, v2 = self.F1.value(x1), self.F2.value(x2)
        if is_infinite(v1) or is_infinite(v2):
            return np.inf
        return v1 + v2

    def lagrangian(self, x1, x2, y, rho):
        r = self.residual(x1, x2)
        return self.objective(x1, x2) + float(np.dot(y, r)) + 0.5 * rho * float(np.dot(r, r))


@dataclass(frozen=True)
class AdmmConfig:
    rho: float = 1.0
    tau: float = 1.0
    max_iters: int = 2000
    primal_tol: float = 1e-8
    dual_tol: float = 1e-8
    inner_tol: float = 1e-10
    max_inner: int = 20000
    x1_0: object = None
    x2_0: object = None
    y0: object = None

    def __post_init__(self):
        if not (np.isfinite(self.rho) and self.rho > 0):
            raise ParameterError("rho", f"must be > 0 (got {self.rho})")
        if not (0 < self.tau < GOLDEN):
            raise ParameterError(
                "tau", f"must lie in (0, (1 + sqrt 5)/2) = (0, {GOLDEN:.10f}) (got {self.tau})"
            )
        if int(self.max_iters) < 1:
            raise ParameterError("max_iters", "must be a positive integer")
        if not self.inner_tol > 0:
            raise ParameterError("inner_tol", "must be positive")
        if int(self.max_inner) < 1:
            raise ParameterError("max_inner", "must be a positive integer")


class _BlockSolver:
    """Minimizer of ``atom(x) + smooth(x) + <y, A x> + rho/2 ||A x + w||^2``.

    Three paths, chosen once per block:
    ``prox``   no smooth part and ``A^T A = alpha I``: one prox call;
    ``linear`` Zero atom with quadratic (or absent) smooth part: Cholesky solve;
    ``inner``  anything else: restarted accelerated proximal gradient until
               ``dist(0, d objective) <= inner_tol``.
    """

    def __init__(self, atom, smooth, A, rho):
        self.atom, self.smooth, self.A, self.rho = atom, smooth, A, float(rho)
        G = A.gram()
        alpha = float(np.mean(np.diag(G)))
        self.alpha = alpha
        if smooth is None and alpha > 0 and np.max(np.abs(G - alpha * np.eye(G.shape[0]))) <= 1e-12 * alpha:
            self.mode = "prox"
        elif isinstance(atom, Zero) and (smooth is None or smooth.hessian is not None):
            self.mode = "linear"
            Q = self.rho * G
            if smooth is not None:
                Q = Q + smooth.hessian
                self._lin0 = smooth.grad(np.zeros(A.cols))
            else:
                self._lin0 = np.zeros(A.cols)
            self._chol = cho_factor(Q)
        else:
            self.mode = "inner"
            ls = 0.0 if smooth is None else smooth.lipschitz
            if ls is None:
                raise ParameterError("smooth", "inner solver needs a gradient Lipschitz constant")
            self.L = ls + self.rho * float(np.linalg.eigvalsh(G)[-1])

    def objective_fn(self, y, w):
        A, rho, smooth = self.A, self.rho, self.smooth

        class _Q:
            lipschitz = None
            hessian = None

            def value(_, x):
                r = A.apply(x) + w
                v = float(np.dot(y, A.apply(x))) + 0.5 * rho * float(np.dot(r, r))
                return v + (smooth.value(x) if smooth is not None else 0.0)

            def grad(_, x):
                g = A.adjoint_apply(y + rho * (A.apply(x) + w))
                return g + (smooth.grad(x) if smooth is not None else 0.0)

        return StructuredFn(self.atom, _Q())

    def solve(self, y, w, x_init, inner_tol, max_inner):
        """Return ``(x, inner_iterations, optimality_residual)``."""
        A, rho = self.A, self.rho
        F = self.objective_fn(y, w)
        if self.mode == "prox":
            v = -A.adjoint_apply(w + y / rho) / self.alpha
            x = prox(self.atom, 1.0 / (rho * self.alpha), v).point
            return x, 0, subdiff_distance(F, x)
        if self.mode == "linear":
            rhs = -self._lin0 - A.adjoint_apply(y + rho * w)
            x = cho_solve(self._chol, rhs)
            return x, 0, subdiff_distance(F, x)
        step = 1.0 / self.L
        x = np.array(x_init, dtype=float)
        x = self.atom.project(x)
        xm, t = x.copy(), 1.0
        res = subdiff_distance(F, x)
        for it in range(1, max_inner + 1):
            if not is_infinite(res) and res <= inner_tol:
                return x, it - 1, res
            z = x + ((t - 1.0) / (1.0 + np.sqrt(1 + 4 * t * t))) * 2.0 * (x - xm) if it > 1 else x
            x_new = prox(self.atom, step, z - step * F.smooth.grad(z)).point
            # gradient-based adaptive restart
            if np.dot(z - x_new, x_new - x) > 0:
                t = 1.0
            else:
                t = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
            xm, x = x, x_new
            res = subdiff_distance(F, x)
        if not is_infinite(res) and res <= inner_tol:
            return x, max_inner, res
        raise SubproblemError(
            f"inner solver hit max_inner={max_inner} with residual {res:.3g} > inner_tol={inner_tol:g}",
            residual=res,
        )


def _block_solvers(p, rho):
    return _BlockSolver(p.f1, p.smooth1, p.A1, rho), _BlockSolver(p.f2, p.smooth2, p.A2, rho)


def solver_modes(p, rho):
    """Which path (``prox``, ``linear`` or ``inner``) each block update takes."""
    return tuple(s.mode for s in _block_solvers(p, rho))


def solve_x1_subproblem(p, x2, y, rho, cfg, x_init=None):
    """``argmin_x1 L(x1, x2, y)``."""
    s1, _ = _block_solvers(p, rho)
    w = p.A2.apply(x2) - p.b
    x_init = np.zeros(p.n) if x_init is None else x_init
    return s1.solve(np.asarray(y, float), w, x_init, cfg.inner_tol, cfg.max_inner)[0]


def solve_x2_subproblem(p, x1, y, rho, cfg, x_init=None):
    """``argmin_x2 L(x1, x2, y)`` for the freshly updated `x1`."""
    _, s2 = _block_solvers(p, rho)
    w = p.A1.apply(x1) - p.b
    x_init = np.zeros(p.m) if x_init is None else x_init
    return s2.solve(np.asarray(y, float), w, x_init, cfg.inner_tol, cfg.max_inner)[0]


@dataclass
class AdmmTrace:
    """Iterates ``(x1_k, x2_k, y_k)``, k = 0..K, and per-iteration diagnostics.

    ``dx2[k] = ||A2 (x2_k - x2_{k-1})||`` with ``dx2[0] = 0``. Certificate
    loops start at k = 1.
    """

    rho: float
    tau: float
    X1: np.ndarray
    X2: np.ndarray
    Y: np.ndarray
    lagrangian: np.ndarray
    R: np.ndarray
    r_norm: np.ndarray
    dx2: np.ndarray
    inner1: np.ndarray
    inner2: np.ndarray
    sub_residual: np.ndarray
    modes: tuple = ("", "")
    converged: bool = False
    stop_reason: str = "max_iters"

    def __len__(self):
        return self.X1.shape[0]

    @property
    def iterations(self):
        return len(self) - 1

    @classmethod
    def from_points(cls, p, X1, X2, Y, rho, tau, inner1=None, inner2=None, sub_residual=None,
                    modes=("", ""), converged=False, stop_reason="max_iters"):
        X1 = np.asarray(X1, float).reshape(-1, p.n)
        X2 = np.asarray(X2, float).reshape(-1, p.m)
        Y = np.asarray(Y, float).reshape(-1, p.p)
        K1 = X1.shape[0]
        R = X1 @ p.A1.matrix.T + X2 @ p.A2.matrix.T - p.b
        lag = np.array([p.lagrangian(X1[k], X2[k], Y[k], rho) for k in range(K1)])
        dx2 = np.zeros(K1)
        if K1 > 1:
            dx2[1:] = np.linalg.norm(np.diff(X2, axis=0) @ p.A2.matrix.T, axis=1)
        zeros = np.zeros(K1, dtype=int)
        return cls(
            rho=float(rho),
            tau=float(tau),
            X1=X1,
            X2=X2,
            Y=Y,
            lagrangian=lag,
            R=R,
            r_norm=np.linalg.norm(R, axis=1),
            dx2=dx2,
            inner1=zeros if inner1 is None else np.asarray(inner1, int),
            inner2=zeros if inner2 is None else np.asarray(inner2, int),
            sub_residual=np.zeros(K1) if sub_residual is None else np.asarray(sub_residual, float),
            modes=tuple(modes),
            converged=bool(converged),
            stop_reason=stop_reason,
        )


def _initial(p, cfg):
    x1 = np.zeros(p.n) if cfg.x1_0 is None else as_vec(cfg.x1_0, p.n, "x1_0")
    x2 = np.zeros(p.m) if cfg.x2_0 is None else as_vec(cfg.x2_0, p.m, "x2_0")
    y = np.zeros(p.p) if cfg.y0 is None else as_vec(cfg.y0, p.p, "y0")
    return p.f1.project(x1), p.f2.project(x2), np.array(y, dtype=float)


def run_admm(p, cfg):
    """Run ADMM, recording every iterate.

    Stops once ``||r_k|| <= primal_tol`` and
    ``rho*||A2 (x2_k - x2_{k-1})|| <= dual_tol`` (k >= 1), or after
    `max_iters`. Tolerances of None disable early stopping.

    Raises
    ------
    SubproblemError
        An inner solve failed; ``.iteration`` holds the outer index.
    """
    rho, tau = float(cfg.rho), float(cfg.tau)
    s1, s2 = _block_solvers(p, rho)
    x1, x2, y = _initial(p, cfg)
    X1, X2, Y = [x1], [x2], [y]
    in1, in2, subres = [0], [0], [0.0]
    converged, reason = False, "max_iters"
    for k in range(1, int(cfg.max_iters) + 1):
        try:
            x1, i1, r1 = s1.solve(y, p.A2.apply(x2) - p.b, x1, cfg.inner_tol, cfg.max_inner)
            x2_new, i2, r2 = s2.solve(y, p.A1.apply(x1) - p.b, x2, cfg.inner_tol, cfg.max_inner)
        except SubproblemError as exc:
            exc.iteration = k
            exc.args = (f"iteration {k}: {exc.args[0]}",)
            raise
        r = p.A1.apply(x1) + p.A2.apply(x2_new) - p.b
        y = y + (tau * rho) * r
        dx2 = float(np.linalg.norm(p.A2.apply(x2_new - x2)))
        x2 = x2_new
        X1.append(x1)
        X2.append(x2)
        Y.append(y)
        in1.append(i1)
        in2.append(i2)
        subres.append(max(r1, r2))
        if (
            cfg.primal_tol is not None
            and cfg.dual_tol is not None
            and np.linalg.norm(r) <= cfg.primal_tol
            and rho * dx2 <= cfg.dual_tol
        ):
            converged, reason = True, "tolerance"
            break
    return AdmmTrace.from_points(
        p, np.array(X1), np.array(X2), np.array(Y), rho, tau, in1, in2, subres,
        modes=(s1.mode, s2.mode), converged=converged, stop_reason=reason,
    )


def check_dual_update(trace):
    """Largest relative deviation of ``y_{k+1} - y_k`` from ``tau*rho*r_{k+1}``."""
    if len(trace) < 2:
        return 0.0
    step = trace.tau * trace.rho * trace.R[1:]
    dev = np.linalg.norm(trace.Y[1:] - trace.Y[:-1] - step, axis=1)
    scale = np.linalg.norm(trace.Y[:-1], axis=1) + np.linalg.norm(step, axis=1)
    return float(np.max(np.where(scale > 0, dev / np.where(scale > 0, scale, 1.0), dev)))


@dataclass(frozen=True)
class KKTResult:
    ok: bool
    primal: float
    dual1: float
    dual2: float

    def __bool__(self):
        return self.ok


def kkt_check(p, x1, x2, y, tol):
    """``A1 x1 + A2 x2 = b``, ``-A1^T y in df1(x1)``, ``-A2^T y in df2(x2)`` within `tol`."""
    x1 = as_vec(x1, p.n, "x1")
    x2 = as_vec(x2, p.m, "x2")
    y = as_vec(y, p.p, "y")
    primal = float(np.linalg.norm(p.residual(x1, x2)))
    d1 = distance_to_subdiff(p.F1, x1, -p.A1.adjoint_apply(y))
    d2 = distance_to_subdiff(p.F2, x2, -p.A2.adjoint_apply(y))
    d1 = np.inf if is_infinite(d1) else d1
    d2 = np.inf if is_infinite(d2) else d2
    return KKTResult(bool(primal <= tol and d1 <= tol and d2 <= tol), primal, float(d1), float(d2))


@dataclass
class AuxSequences:
    """Error vectors against a KKT reference and the Lyapunov sequences.

    ``u[j]`` is ``u^{j+1}`` (defined from k = 1); all other arrays are
    indexed by k = 0..K directly.
    """

    rho: float
    tau: float
    e1: np.ndarray
    e2: np.ndarray
    ey: np.ndarray
    u: np.ndarray
    v: np.ndarray
    Psi: np.ndarray
    Phi: np.ndarray
    coupled_err: np.ndarray = field(default=None)
    a2_step: np.ndarray = field(default=None)


def compute_aux(p, trace, ref):
    """Error vectors, ``u^k``, ``v^k``, ``Psi_k`` and ``Phi_k`` for a trace.

    ::

        e = (x1_k, x2_k, y_k) - (x1*, x2*, y*)
        w_k = y_k + (1 - tau) rho (A1 e1_k + A2 e2_k)
        u^k = -A1^T [w_k + rho A2 (x2_{k-1} - x2_k)]
        v^k = -A2^T w_k
        Psi_k = ||ey_k||^2 / (tau rho) + rho ||A2 e2_k||^2
        Phi_k = Psi_k + max(1 - tau, 1 - 1/tau) rho ||A1 e1_k + A2 e2_k||^2
    """
    x1s, x2s, ys = (np.asarray(v, float) for v in ref)
    res = kkt_check(p, x1s, x2s, ys, 1e-8)
    if not res:
        raise PreconditionError(
            f"reference is not a KKT pair (primal {res.primal:.3g}, dual1 {res.dual1:.3g}, "
            f"dual2 {res.dual2:.3g} at tol 1e-8)"
        )
    rho, tau = trace.rho, trace.tau
    A1, A2 = p.A1.matrix, p.A2.matrix
    e1 = trace.X1 - x1s
    e2 = trace.X2 - x2s
    ey = trace.Y - ys
    Ae = e1 @ A1.T + e2 @ A2.T
    W = trace.Y + (1 - tau) * rho * Ae
    v = -(W @ A2)
    u = -((W[1:] + rho * (np.diff(-trace.X2, axis=0) @ A2.T)) @ A1)
    A2e2 = e2 @ A2.T
    Psi = np.sum(ey**2, axis=1) / (tau * rho) + rho * np.sum(A2e2**2, axis=1)
    Phi = Psi + max(1 - tau, 1 - 1 / tau) * rho * np.sum(Ae**2, axis=1)
    return AuxSequences(
        rho=rho, tau=tau, e1=e1, e2=e2, ey=ey, u=u, v=v, Psi=Psi, Phi=Phi,
        coupled_err=np.linalg.norm(Ae, axis=1), a2_step=trace.dx2.copy(),
    )


def check_uv_membership(p, aux, trace, tol=None):
    """``u^k in df1(x1_k)`` and ``v^k in df2(x2_k)`` for every k >= 1.

    The default `tol` is 1e-10 when both subproblems were solved in closed
    form and ``100 * max(inner residual)`` otherwise.
    """
    tag = TAGS["uv"]
    if tol is None:
        inexact = max(float(np.max(trace.sub_residual[1:], initial=0.0)), 0.0)
        tol = 1e-10 if "inner" not in trace.modes else max(1e-10, 100 * inexact)
    if len(trace) < 2:
        return CheckReport("uv", tag, VACUOUS, tolerances={"tol": tol})
    F1, F2 = p.F1, p.F2
    worst, bad, msgs = 0.0, [], []
    for k in range(1, len(trace)):
        du = distance_to_subdiff(F1, trace.X1[k], aux.u[k - 1])
        dv = distance_to_subdiff(F2, trace.X2[k], aux.v[k])
        du = np.inf if is_infinite(du) else du
        dv = np.inf if is_infinite(dv) else dv
        worst = max(worst, du, dv)
        if du > tol or dv > tol:
            bad.append(k)
            if len(msgs) < 20:
                msgs.append(f"[{tag}] k={k}: dist(u, df1) = {du:.6g}, dist(v, df2) = {dv:.6g} > tol {tol:g}")
    return CheckReport(
        "uv", tag, FAIL if bad else PASS, min_margin=float(tol - worst), violations=bad,
        tolerances={"tol": tol}, messages=msgs, details={"max_distance": float(worst)},
    )


def descent_coefficients(tau):
    """``(min(tau, 1 + tau - tau^2), min(1, 1 + 1/tau - tau))``."""
    return min(tau, 1 + tau - tau**2), min(1.0, 1 + 1 / tau - tau)


def check_phi_descent(aux, rho, tau):
    """For k >= 1::

        Phi_k - Phi_{k+1} >= min(tau, 1+tau-tau^2) rho ||A2 (x2_k - x2_{k+1})||^2
                            + min(1, 1+1/tau-tau) rho ||A1 e1_{k+1} + A2 e2_{k+1}||^2

    with slack ``1e-8 * (1 + Phi_1)``.
    """
    tag = TAGS["phi"]
    c1, c2 = descent_coefficients(tau)
    if not (c1 > 0 and c2 > 0):
        raise PreconditionError(f"descent coefficients not positive for tau={tau}: ({c1}, {c2})")
    if not (np.isclose(aux.rho, rho) and np.isclose(aux.tau, tau)):
        raise ParameterError("rho/tau", "do not match the auxiliary sequences")
    Phi = aux.Phi
    if Phi.size < 3:
        return CheckReport("phi", tag, VACUOUS, tolerances={"c1": c1, "c2": c2})
    slack = 1e-8 * (1 + Phi[1])
    k = np.arange(1, Phi.size - 1)
    lhs = c1 * rho * aux.a2_step[k + 1] ** 2 + c2 * rho * aux.coupled_err[k + 1] ** 2
    rhs = Phi[k] - Phi[k + 1]
    margin = rhs + slack - lhs
    bad = k[margin < 0]
    msgs = [violation_message(tag, int(j), lhs[j - 1], rhs[j - 1], slack) for j in bad[:20]]
    return CheckReport(
        "phi", tag, FAIL if bad.size else PASS, min_margin=float(margin.min()),
        violations=[int(j) for j in bad], tolerances={"slack": slack, "c1": c1, "c2": c2},
        messages=msgs, details={"Phi_1": float(Phi[1]), "Phi_last": float(Phi[-1])},
    )


def check_phi_monotone(aux):
    """``Phi_{k+1} <= Phi_k`` for k >= 1, slack ``1e-8 * (1 + Phi_1)``."""
    Phi = aux.Phi
    if Phi.size < 3:
        return CheckReport("phi-monotone", TAGS["phi"], VACUOUS)
    slack = 1e-8 * (1 + Phi[1])
    inc = Phi[2:] - Phi[1:-1]
    bad = np.flatnonzero(inc > slack) + 1
    return CheckReport(
        "phi-monotone", TAGS["phi"], FAIL if bad.size else PASS, min_margin=float(slack - inc.max()),
        violations=[int(j) for j in bad], tolerances={"slack": slack},
    )


def check_summability(aux, rho, tau):
    """Partial sums of ``||A2 (x2_k - x2_{k+1})||^2`` stay below ``Phi_1 / (c1 rho)``."""
    c1, _ = descent_coefficients(tau)
    Phi = aux.Phi
    if Phi.size < 3:
        return CheckReport("summability", TAGS["phi"], VACUOUS)
    bound = Phi[1] / (c1 * rho)
    partial = np.cumsum(aux.a2_step[2:] ** 2)
    slack = 1e-8 * (1 + bound)
    bad = np.flatnonzero(partial > bound + slack) + 1
    return CheckReport(
        "summability", TAGS["phi"], FAIL if bad.size else PASS,
        min_margin=float(bound + slack - partial.max()), violations=[int(j) for j in bad],
        tolerances={"slack": slack}, details={"bound": float(bound), "total": float(partial[-1])},
    )


def check_convergence_to_kkt(p, trace, tol):
    """Cauchy tail of ``(x1, x2, y)`` and a KKT final iterate.

    ``inconclusive`` when the run hit `max_iters` before its residual
    tolerances, or when A1 or A2 is column-rank deficient.
    """
    tag = TAGS["kkt"]
    tols = {"tol": tol}
    if not p.full_rank:
        return CheckReport("kkt", tag, INCONCLUSIVE, tolerances=tols,
                           messages=["A1 or A2 is rank deficient; convergence theory does not apply"])
    if not trace.converged:
        return CheckReport("kkt", tag, INCONCLUSIVE, tolerances=tols,
                           messages=[f"run stopped by {trace.stop_reason} before residuals closed"])
    from .bcd import CAUCHY_SCALE, _tail_diameter

    W = np.hstack([trace.X1, trace.X2, trace.Y])
    tail = W[-max(2, W.shape[0] // 10):]
    diam = _tail_diameter(tail)
    scale = CAUCHY_SCALE * (1 + float(np.linalg.norm(W[0])))
    k = len(trace) - 1
    res = kkt_check(p, trace.X1[k], trace.X2[k], trace.Y[k], tol)
    msgs = []
    if diam > scale:
        msgs.append(f"[{tag}] tail diameter {diam:.6g} exceeds {scale:.3g}")
    if not res:
        msgs.append(
            f"[{TAGS['kkt_point']}] k={k}: residuals primal={res.primal:.3g} dual1={res.dual1:.3g} "
            f"dual2={res.dual2:.3g} vs tol {tol:g}"
        )
    ok = bool(res) and diam <= scale
    return CheckReport(
        "kkt", tag, PASS if ok else FAIL,
        min_margin=float(tol - max(res.primal, res.dual1, res.dual2)),
        violations=[] if ok else [k], tolerances={**tols, "cauchy_scale": scale}, messages=msgs,
        details={"primal": res.primal, "dual1": res.dual1, "dual2": res.dual2, "tail_diameter": diam,
                 "iterations": k},
    )
