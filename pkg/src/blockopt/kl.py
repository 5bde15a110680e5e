"""Power-family desingularizers and KL-inequality diagnostics along traces.

Only ``phi(t) = c/(1 - theta) * t**(1 - theta)`` is supported. The open
neighbourhood of the KL definition is replaced by the tail of a trace
(after a burn-in index): the inequality is checked along the actual
approach path, which is weaker than checking it on a set.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, PreconditionError
from .prox import is_infinite
from .report import FAIL, PASS, VACUOUS, CheckReport

__all__ = [
    "Desingularizer",
    "verify_desingularizing",
    "KLReport",
    "kl_inequality_along_trace",
    "KLFit",
    "fit_kl_exponent",
    "fit_kl_exponent_from_data",
    "envelope_desingularizer",
    "uniform_kl_surrogate",
    "gaps_and_distances",
    "KL_TAG",
]

KL_TAG = "KL_point"
VIOLATION_TOL = 1e-8
TINY = float(np.finfo(float).tiny)


@dataclass(frozen=True)
class Desingularizer:
    c: float
    theta: float
    eta: float = np.inf

    def __post_init__(self):
        if not (np.isfinite(self.c) and self.c > 0):
            raise ParameterError("c", "must be a positive finite number")
        if not (0.0 <= self.theta < 1.0):
            raise ParameterError("theta", "must lie in [0, 1)")
        if not self.eta > 0:
            raise ParameterError("eta", "must be positive")

    def phi(self, t):
        t = np.asarray(t, dtype=float)
        return self.c / (1.0 - self.theta) * t ** (1.0 - self.theta)

    def dphi(self, t):
        t = np.asarray(t, dtype=float)
        return self.c * t ** (-self.theta)


def verify_desingularizing(d, grid_points=64, phi=None, dphi=None):
    """Grid check of ``phi(0) = 0``, ``phi' > 0`` and midpoint concavity.

    The grid is log-spaced in ``(0, eta)`` (capped at 1e6 for infinite
    `eta`). `phi` / `dphi` override the desingularizer's own formulas,
    which lets arbitrary candidates be screened.
    """
    if grid_points < 3:
        raise ParameterError("grid_points", "must be at least 3")
    phi = d.phi if phi is None else phi
    dphi = d.dphi if dphi is None else dphi
    top = min(d.eta, 1e6) * (1 - 1e-9)
    grid = np.geomspace(top * 1e-12, top, grid_points)
    if float(phi(0.0)) != 0.0:
        return False
    if not np.all(np.asarray(dphi(grid)) > 0):
        return False
    vals = np.asarray(phi(grid), dtype=float)
    mids = np.asarray(phi(0.5 * (grid[:-1] + grid[1:])), dtype=float)
    chord = 0.5 * (vals[:-1] + vals[1:])
    return bool(np.all(mids >= chord - 1e-12 * np.maximum(1.0, np.abs(chord))))


@dataclass
class KLReport:
    margins: np.ndarray
    indices: np.ndarray
    violating: list = field(default_factory=list)
    skipped: int = 0

    @property
    def violations(self):
        return len(self.violating)

    @property
    def vacuous(self):
        return self.indices.size == 0

    def to_check(self, d, name="kl"):
        status = VACUOUS if self.vacuous else (FAIL if self.violating else PASS)
        msgs = []
        for k in self.violating[:20]:
            j = int(np.searchsorted(self.indices, k))
            msgs.append(
                f"[{KL_TAG}] k={k}: phi'(gap)*dist - 1 = {self.margins[j]:.6g} below -{VIOLATION_TOL:g}"
            )
        return CheckReport(
            name=name,
            tag=KL_TAG,
            status=status,
            min_margin=float(self.margins.min()) if self.margins.size else None,
            violations=list(self.violating),
            tolerances={"violation_tol": VIOLATION_TOL},
            messages=msgs,
            details={"c": d.c, "theta": d.theta, "eta": d.eta, "eligible": int(self.indices.size),
                     "skipped": self.skipped},
        )


def gaps_and_distances(F, points, f_limit):
    """``F(x_k) - f_limit`` and ``dist(0, dF(x_k))`` per point (inf when infeasible)."""
    gaps, dists = [], []
    for p in points:
        v = F.value(p)
        gaps.append(np.inf if is_infinite(v) else v - f_limit)
        dv = F.subdiff_distance(p)
        dists.append(np.inf if is_infinite(dv) else dv)
    return np.asarray(gaps, float), np.asarray(dists, float)


def kl_inequality_along_trace(F, points, f_limit, d, burn_in=0, gap_floor=TINY):
    """Margins ``phi'(F(x_k) - f_limit) * dist(0, dF(x_k)) - 1`` on a trace.

    Points with gap outside ``(gap_floor, eta)`` or index below `burn_in`
    are skipped. The default floor drops subnormal gaps, which carry too
    few significant bits to evaluate the inequality. An infinite
    subdifferential distance counts as satisfied (infinite margin).
    Margins below ``-1e-8`` are violations.
    """
    gaps, dists = gaps_and_distances(F, points, f_limit)
    k = np.arange(gaps.size)
    ok = (k >= burn_in) & (gaps > gap_floor) & (gaps > 0) & (gaps < d.eta)
    idx = k[ok]
    with np.errstate(invalid="ignore"):
        margins = d.dphi(gaps[ok]) * dists[ok] - 1.0
    margins = np.where(np.isinf(dists[ok]), np.inf, margins)
    bad = [int(i) for i, m in zip(idx, margins) if m < -VIOLATION_TOL]
    return KLReport(margins=margins, indices=idx, violating=bad, skipped=int(gaps.size - idx.size))


@dataclass(frozen=True)
class KLFit:
    theta: float
    c: float
    r2: float
    n: int


def fit_kl_exponent_from_data(gaps, dists):
    """Least-squares fit of ``log dist = theta * log gap - log c``.

    A desingularizer with these ``(c, theta)`` makes ``phi'(gap)*dist``
    equal 1 on the fitted line.
    """
    gaps = np.asarray(gaps, float)
    dists = np.asarray(dists, float)
    keep = (gaps > 0) & (dists > 0) & np.isfinite(gaps) & np.isfinite(dists)
    lg, ld = np.log(gaps[keep]), np.log(dists[keep])
    if lg.size < 10:
        raise PreconditionError(f"insufficient decay: {lg.size} usable points, need at least 10")
    if np.ptp(lg) <= 1e-12 * max(1.0, np.abs(lg).max()):
        raise PreconditionError("insufficient decay: all gaps are equal")
    slope, intercept = np.polyfit(lg, ld, 1)
    pred = slope * lg + intercept
    ss_res = float(np.sum((ld - pred) ** 2))
    ss_tot = float(np.sum((ld - ld.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return KLFit(theta=float(slope), c=float(np.exp(-intercept)), r2=r2, n=int(lg.size))


def fit_kl_exponent(points, F, f_limit, burn_in=0, gap_floor=1e-14):
    """Estimate the KL exponent along a trace; see :func:`fit_kl_exponent_from_data`."""
    gaps, dists = gaps_and_distances(F, points, f_limit)
    k = np.arange(gaps.size)
    ok = (k >= burn_in) & (gaps > gap_floor)
    return fit_kl_exponent_from_data(gaps[ok], dists[ok])


def envelope_desingularizer(gaps, dists, theta, eta=np.inf):
    """Smallest-``c`` power desingularizer satisfying every supplied point.

    `theta` is clipped into ``[0, 1 - 1e-6]``. Points with zero distance
    and positive gap cannot be satisfied by any ``c``; they are ignored
    here and surface as violations in :func:`kl_inequality_along_trace`.
    """
    theta = float(np.clip(theta, 0.0, 1.0 - 1e-6))
    gaps = np.asarray(gaps, float)
    dists = np.asarray(dists, float)
    keep = (gaps > 0) & (gaps < eta) & (dists > 0) & np.isfinite(dists)
    if not np.any(keep):
        return Desingularizer(1.0, theta, eta)
    c = float(np.max(gaps[keep] ** theta / dists[keep]))
    return Desingularizer(c * (1 + 1e-12), theta, eta)


def uniform_kl_surrogate(F, traces, f_limit, burn_in=0, gap_floor=1e-14, eta=np.inf):
    """One shared desingularizer for several traces (uniformized KL surrogate).

    Fits the exponent on the pooled tails, takes the envelope ``c`` and
    re-checks every trace with it. Returns ``(desingularizer, reports)``.
    """
    pooled_g, pooled_d = [], []
    for pts in traces:
        g, dd = gaps_and_distances(F, pts, f_limit)
        k = np.arange(g.size)
        ok = (k >= burn_in) & (g > gap_floor)
        pooled_g.append(g[ok])
        pooled_d.append(dd[ok])
    g = np.concatenate(pooled_g)
    dd = np.concatenate(pooled_d)
    fit = fit_kl_exponent_from_data(g, dd)
    d = envelope_desingularizer(g, dd, fit.theta, eta)
    reports = [kl_inequality_along_trace(F, pts, f_limit, d, burn_in, gap_floor) for pts in traces]
    return d, reports
