"""Proximal alternating linearized minimization for two-block problems.

Minimizes ``psi(x, y) = f(x) + g(y) + H(x, y)`` with fixed steps
``1/(gamma*l)``, ``gamma > 1``, where ``l`` is the Lipschitz constant of
the full gradient of ``H``::

    x+ = prox_{c f}(x - c * grad_x H(x, y))
    y+ = prox_{c g}(y - c * grad_y H(x+, y))

The y-step uses the updated x. Each certificate check below re-derives
one convergence inequality from a recorded :class:`BcdTrace`.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .core import BlockPair, as_vec, make_rng
from .errors import InfeasibleError, ParameterError, SolverError
from .prox import INFINITE, is_infinite, prox
from .report import FAIL, INCONCLUSIVE, PASS, VACUOUS, CheckReport, violation_message
from .smooth import CallableCoupling, QuadraticCoupling, SmoothCoupling
from .subdiff import StructuredFn, block_subdiff_distances, critical_point_check, distance_to_subdiff

__all__ = [
    "SmoothCoupling",
    "QuadraticCoupling",
    "CallableCoupling",
    "BcdProblem",
    "BcdConfig",
    "BcdTrace",
    "run_bcd",
    "default_initial_point",
    "check_sufficient_descent",
    "check_step_vanishing",
    "compute_subgrad_witness",
    "check_subdiff_bound",
    "check_finite_length",
    "check_limit_criticality",
    "TAGS",
]

TAGS = {
    "descent": "Sufficient_Descent1",
    "steps": "Sufficient_Descent2",
    "subdiff": "Ψ_subdiff_bound",
    "length": "Limited_length",
    "critical": "Convergence_to_critpt",
}

CAUCHY_SCALE = 1e-6


@dataclass(frozen=True)
class BcdProblem:
    """``f(x) + g(y) + H(x, y)`` with atoms `f`, `g` and coupling `H`."""

    f: object
    g: object
    H: SmoothCoupling
    n: int
    m: int

    def __post_init__(self):
        for name in ("f", "g"):
            atom = getattr(self, name)
            if not np.isfinite(atom.lower_bound):
                raise ParameterError(name, "atom must be bounded below")

    def value(self, z):
        fv = self.f.value(z.x)
        gv = self.g.value(z.y)
        if is_infinite(fv) or is_infinite(gv):
            return INFINITE
        return fv + gv + self.H.value(z.x, z.y)

    def subdiff_distance(self, z):
        dx, dy = block_subdiff_distances(self, z)
        if is_infinite(dx) or is_infinite(dy):
            return INFINITE
        return float(np.hypot(dx, dy))

    def feasible(self, z):
        return self.f.contains(z.x) and self.g.contains(z.y)

    @property
    def lipschitz(self):
        return self.H.lipschitz


@dataclass(frozen=True)
class BcdConfig:
    gamma: float = 2.0
    max_iters: int = 1000
    stop_tol: float = 0.0
    seed: int = 0
    x0: object = None
    y0: object = None
    bound_factor: float = 1e6

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma > 1):
            raise ParameterError("gamma", f"must be > 1 (got {self.gamma})")
        if int(self.max_iters) < 1:
            raise ParameterError("max_iters", "must be a positive integer")
        if self.stop_tol is not None and not self.stop_tol >= 0:
            raise ParameterError("stop_tol", "must be nonnegative (or None to disable)")


def default_initial_point(p, seed):
    """Uniform draw from the unit ball, projected onto indicator domains."""
    rng = make_rng(seed)
    z = rng.standard_normal(p.n + p.m)
    z *= rng.uniform() ** (1.0 / z.size) / np.linalg.norm(z)
    return BlockPair(p.f.project(z[: p.n]), p.g.project(z[p.n :]))


@dataclass
class BcdTrace:
    """Iterates ``z_0 .. z_K`` with derived per-iteration quantities.

    ``steps[k] = ||z_{k+1} - z_k||`` (length K); all other arrays have
    one entry per record (length K + 1).
    """

    gamma: float
    lipschitz: float
    X: np.ndarray
    Y: np.ndarray
    psi: np.ndarray
    steps: np.ndarray
    steps_x: np.ndarray
    steps_y: np.ndarray
    dist: np.ndarray
    converged: bool = False
    stop_reason: str = "max_iters"

    def __len__(self):
        return self.X.shape[0]

    @property
    def iterations(self):
        return len(self) - 1

    def z(self, k):
        return BlockPair(self.X[k], self.Y[k])

    def points(self):
        return [self.z(k) for k in range(len(self))]

    @classmethod
    def from_points(cls, p, X, Y, gamma, lipschitz, converged=False, stop_reason="max_iters"):
        """Rebuild all derived columns from raw iterates."""
        X = np.asarray(X, dtype=float).reshape(-1, p.n)
        Y = np.asarray(Y, dtype=float).reshape(-1, p.m)
        psi = np.empty(X.shape[0])
        dist = np.empty(X.shape[0])
        for k in range(X.shape[0]):
            z = BlockPair(X[k], Y[k])
            v = p.value(z)
            psi[k] = np.inf if is_infinite(v) else v
            d = p.subdiff_distance(z)
            dist[k] = np.inf if is_infinite(d) else d
        dX = np.linalg.norm(np.diff(X, axis=0), axis=1)
        dY = np.linalg.norm(np.diff(Y, axis=0), axis=1)
        return cls(
            gamma=float(gamma),
            lipschitz=float(lipschitz),
            X=X,
            Y=Y,
            psi=psi,
            steps=np.hypot(dX, dY),
            steps_x=dX,
            steps_y=dY,
            dist=dist,
            converged=bool(converged),
            stop_reason=stop_reason,
        )


def run_bcd(p, cfg):
    """Run the alternating prox-linear scheme and record every iterate.

    Stops when ``(2*gamma + 2)*l*||z_k - z_{k-1}|| <= stop_tol`` (an upper
    bound on ``dist(0, dpsi(z_k))``) or after `max_iters` iterations;
    ``stop_tol=None`` always runs `max_iters` iterations.

    Raises
    ------
    InfeasibleError
        The initial point lies outside an indicator atom's domain.
    SolverError
        The iterates leave the ball of radius ``bound_factor*(1 + ||z_0||)``.
    """
    l = float(p.lipschitz)
    gamma = float(cfg.gamma)
    step = 1.0 / (gamma * l)
    M = (2 * gamma + 2) * l
    if cfg.x0 is None and cfg.y0 is None:
        z0 = default_initial_point(p, cfg.seed)
    else:
        if cfg.x0 is None or cfg.y0 is None:
            raise ParameterError("x0/y0", "give both initial blocks or neither")
        z0 = BlockPair(as_vec(cfg.x0, p.n, "x0"), as_vec(cfg.y0, p.m, "y0"))
    if not p.f.contains(z0.x):
        raise InfeasibleError("x0 lies outside the domain of f")
    if not p.g.contains(z0.y):
        raise InfeasibleError("y0 lies outside the domain of g")
    radius = cfg.bound_factor * (1.0 + z0.norm())

    xs, ys = [z0.x.copy()], [z0.y.copy()]
    x, y = xs[0], ys[0]
    converged, reason = False, "max_iters"
    for k in range(int(cfg.max_iters)):
        x_new = prox(p.f, step, x - step * p.H.grad_x(x, y)).point
        y_new = prox(p.g, step, y - step * p.H.grad_y(x_new, y)).point
        if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(y_new))):
            raise SolverError(f"non-finite iterate at k={k + 1}")
        xs.append(x_new)
        ys.append(y_new)
        dz = np.hypot(np.linalg.norm(x_new - x), np.linalg.norm(y_new - y))
        if np.hypot(np.linalg.norm(x_new), np.linalg.norm(y_new)) > radius:
            raise SolverError(
                f"iterates unbounded at k={k + 1}: ||z|| exceeds {radius:.3g}; "
                "the boundedness hypothesis of the convergence theory fails"
            )
        x, y = x_new, y_new
        if cfg.stop_tol is not None and M * dz <= cfg.stop_tol:
            converged, reason = True, "stop_tol"
            break
    return BcdTrace.from_points(p, np.array(xs), np.array(ys), gamma, l, converged, reason)


def _check_params(trace, gamma, l):
    if not np.isclose(trace.gamma, gamma, rtol=1e-12, atol=0) or not np.isclose(
        trace.lipschitz, l, rtol=1e-12, atol=0
    ):
        raise ParameterError(
            "gamma/l",
            f"check called with (gamma={gamma}, l={l}) but trace was run with "
            f"(gamma={trace.gamma}, l={trace.lipschitz})",
        )


def check_sufficient_descent(trace, gamma, l):
    """``((gamma-1)*l/2)*||z_{k+1} - z_k||^2 <= psi(z_k) - psi(z_{k+1})`` for all k."""
    _check_params(trace, gamma, l)
    tag = TAGS["descent"]
    psi = trace.psi
    slack = 1e-9 * (1.0 + abs(psi[0]))
    tols = {"slack": slack, "rho1": (gamma - 1) * l}
    if trace.iterations == 0:
        return CheckReport("descent", tag, VACUOUS, tolerances=tols, messages=["single-record trace"])
    lhs = 0.5 * (gamma - 1) * l * trace.steps**2
    rhs = psi[:-1] - psi[1:]
    margin = rhs + slack - lhs
    margin = np.where(np.isfinite(margin), margin, -np.inf)
    bad = np.flatnonzero(margin < 0)
    msgs = [violation_message(tag, int(k), lhs[k], rhs[k], slack) for k in bad[:20]]
    return CheckReport(
        "descent",
        tag,
        FAIL if bad.size else PASS,
        min_margin=float(margin.min()),
        violations=[int(k) for k in bad],
        tolerances=tols,
        messages=msgs,
    )


def check_step_vanishing(trace):
    """Square-summability of the steps and their decay to zero.

    Passes when the squared steps over the last half of the trace make up
    at most 10% of the total and the final step is no larger than the first.
    """
    tag = TAGS["steps"]
    if len(trace) < 10:
        return CheckReport("steps", tag, INCONCLUSIVE, messages=["trace shorter than 10 records"])
    sq = trace.steps**2
    total = float(sq.sum())
    tail = float(sq[sq.size // 2 :].sum())
    frac = tail / total if total > 0 else 0.0
    first, last = float(trace.steps[0]), float(trace.steps[-1])
    ok = frac <= 0.1 and last <= first
    msgs = []
    if frac > 0.1:
        msgs.append(f"[{tag}] tail fraction {frac:.6g} of sum ||dz||^2 exceeds 0.1")
    if last > first:
        msgs.append(f"[{tag}] k={trace.steps.size - 1}: final step {last:.6g} exceeds first {first:.6g}")
    return CheckReport(
        "steps",
        tag,
        PASS if ok else FAIL,
        min_margin=0.1 - frac,
        violations=[] if ok else [int(trace.steps.size - 1)],
        tolerances={"tail_fraction_max": 0.1},
        messages=msgs,
        details={"tail_fraction": frac, "sum_sq": total, "first_step": first, "final_step": last},
    )


def compute_subgrad_witness(p, trace, k, gamma):
    """Explicit element ``(A_x, A_y)`` of ``dpsi(z_k)`` built from two iterates.

    ::

        A_x = (x_{k-1} - x_k)/c + grad_x H(x_k, y_k) - grad_x H(x_{k-1}, y_{k-1})
        A_y = (y_{k-1} - y_k)/c + grad_y H(x_k, y_k) - grad_y H(x_k, y_{k-1})

    with step ``c = 1/(gamma*l)``. The x-step was linearized at
    ``(x_{k-1}, y_{k-1})``, which fixes the last gradient term of ``A_x``.
    """
    if k < 1:
        raise ParameterError("k", "witness needs k >= 1")
    if not np.isclose(trace.gamma, gamma, rtol=1e-12, atol=0):
        raise ParameterError("gamma", f"trace was run with gamma={trace.gamma}")
    inv_c = gamma * trace.lipschitz
    xp, yp = trace.X[k - 1], trace.Y[k - 1]
    x, y = trace.X[k], trace.Y[k]
    H = p.H
    Ax = inv_c * (xp - x) + H.grad_x(x, y) - H.grad_x(xp, yp)
    Ay = inv_c * (yp - y) + H.grad_y(x, y) - H.grad_y(x, yp)
    return Ax, Ay


def check_subdiff_bound(p, trace, gamma, l, membership_tol=1e-8):
    """Witness membership and ``||A_x|| + ||A_y|| <= (2*gamma+2)*l*||z_k - z_{k-1}||``.

    ``details["max_ratio"]`` is the largest ``(||A_x|| + ||A_y||) / (l*||dz||)``
    over steps with ``l*||dz||`` above the slack.
    """
    _check_params(trace, gamma, l)
    tag = TAGS["subdiff"]
    slack = 1e-9 * l
    bound = 2 * gamma + 2
    tols = {"slack": slack, "membership_tol": membership_tol, "bound_constant": bound}
    if len(trace) < 2:
        return CheckReport("subdiff", tag, VACUOUS, tolerances=tols, messages=["single-record trace"])
    margins, bad, msgs = [], [], []
    max_ratio, max_member = 0.0, 0.0
    for k in range(1, len(trace)):
        Ax, Ay = compute_subgrad_witness(p, trace, k, gamma)
        x, y = trace.X[k], trace.Y[k]
        lhs = float(np.linalg.norm(Ax) + np.linalg.norm(Ay))
        dz = trace.steps[k - 1]
        rhs = bound * l * dz
        margins.append(rhs + slack - lhs)
        # below the slack the ratio is rounding noise (tails can be subnormal)
        if l * dz > slack:
            max_ratio = max(max_ratio, lhs / (l * dz))
        dmx = distance_to_subdiff(StructuredFn(p.f, p.H.partial_x(y)), x, Ax)
        dmy = distance_to_subdiff(StructuredFn(p.g, p.H.partial_y(x)), y, Ay)
        dm = np.inf if (is_infinite(dmx) or is_infinite(dmy)) else max(dmx, dmy)
        max_member = max(max_member, dm)
        if lhs > rhs + slack or dm > membership_tol:
            bad.append(k)
            if len(msgs) < 20:
                if lhs > rhs + slack:
                    msgs.append(violation_message(tag, k, lhs, rhs, slack))
                if dm > membership_tol:
                    msgs.append(
                        f"[{tag}] k={k}: witness distance to subdifferential {dm:.6g} > {membership_tol:g}"
                    )
    return CheckReport(
        "subdiff",
        tag,
        FAIL if bad else PASS,
        min_margin=float(min(margins)),
        violations=bad,
        tolerances=tols,
        messages=msgs,
        details={"max_ratio": max_ratio, "max_membership_distance": float(max_member)},
    )


def _tail_diameter(points):
    if points.shape[0] < 2:
        return 0.0
    return float(pdist(points).max())


def _finite_length(steps, Z, tag, name):
    n = steps.size
    S = np.concatenate([[0.0], np.cumsum(steps)])
    inc_last = S[n] - S[n // 2]
    inc_prev = S[n // 2] - S[n // 4]
    scale = CAUCHY_SCALE * (1.0 + float(np.linalg.norm(Z[0])))
    decays = inc_last <= scale or inc_last < inc_prev
    if inc_last == 0:
        limit = float(S[n])
    elif inc_prev > 0 and inc_last < inc_prev:
        r = inc_last / inc_prev
        limit = float(S[n] + inc_last * r / (1 - r))
    else:
        limit = float("inf")
    tail = Z[-max(2, Z.shape[0] // 10) :]
    diam = _tail_diameter(tail)
    cauchy = diam <= scale
    msgs = []
    if not decays:
        msgs.append(
            f"[{tag}] k={n}: increment S_n - S_(n/2) = {inc_last:.6g} does not decay "
            f"(previous {inc_prev:.6g})"
        )
    if not cauchy:
        msgs.append(
            f"[{tag}] k={Z.shape[0] - tail.shape[0]}..{Z.shape[0] - 1}: tail diameter "
            f"{diam:.6g} exceeds {scale:.3g}"
        )
    ok = decays and cauchy and np.isfinite(limit)
    return CheckReport(
        name,
        tag,
        PASS if ok else FAIL,
        min_margin=scale - diam,
        violations=[] if ok else [int(n)],
        tolerances={"cauchy_scale": scale},
        messages=msgs,
        details={
            "total_length": float(S[n]),
            "extrapolated_limit": limit,
            "increment_last_half": float(inc_last),
            "increment_previous_quarter": float(inc_prev),
            "tail_diameter": diam,
        },
    )


def check_finite_length(trace):
    """Bounded partial sums of ``||z_{k+1} - z_k||`` and a Cauchy tail.

    The increments ``S_n - S_(n/2)`` must shrink relative to
    ``S_(n/2) - S_(n/4)`` (or already be below the Cauchy scale), and the
    last 10% of iterates must have diameter at most
    ``1e-6 * (1 + ||z_0||)``.
    """
    tag = TAGS["length"]
    if len(trace) < 10:
        return CheckReport("length", tag, INCONCLUSIVE, messages=["trace shorter than 10 records"])
    Z = np.hstack([trace.X, trace.Y])
    return _finite_length(trace.steps, Z, tag, "length")


def check_limit_criticality(p, trace, tol):
    """Criticality of the final iterate and flatness of psi over the tail.

    Returns ``inconclusive`` unless :func:`check_finite_length` passes.
    """
    tag = TAGS["critical"]
    fl = check_finite_length(trace)
    if fl.status != PASS:
        return CheckReport(
            "critical", tag, INCONCLUSIVE, tolerances={"tol": tol},
            messages=["trace has not converged; limit point unavailable"] + fl.messages,
        )
    z = trace.z(len(trace) - 1)
    dx, dy = block_subdiff_distances(p, z)
    crit = critical_point_check(p, z, tol)
    tail = trace.psi[-max(2, len(trace) // 10) :]
    spread = float(np.ptp(tail))
    psi_star = float(trace.psi[-1])
    spread_tol = tol * (1 + abs(psi_star))
    msgs = []
    if not crit:
        msgs.append(f"[{tag}] k={len(trace) - 1}: dist(0, dpsi) = {dx + dy:.6g} > tol = {tol:g}")
    if spread > spread_tol:
        msgs.append(f"[{tag}] psi spread over tail {spread:.6g} > {spread_tol:.3g}")
    ok = crit and spread <= spread_tol
    return CheckReport(
        "critical",
        tag,
        PASS if ok else FAIL,
        min_margin=float(tol - (dx + dy)),
        violations=[] if ok else [len(trace) - 1],
        tolerances={"tol": tol, "spread_tol": spread_tol},
        messages=msgs,
        details={"dist_x": float(dx), "dist_y": float(dy), "psi_star": psi_star, "psi_spread": spread},
    )
