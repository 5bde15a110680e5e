"""Run the certificate suite for a finished trace and assemble a report."""

import numpy as np

from . import admm, bcd
from .errors import ParameterError
from .kl import (
    Desingularizer,
    envelope_desingularizer,
    fit_kl_exponent,
    gaps_and_distances,
    kl_inequality_along_trace,
)
from .report import FAIL, INCONCLUSIVE, PASS, CheckReport

__all__ = [
    "REPORT_SCHEMA_VERSION",
    "BCD_CHECKS",
    "ADMM_CHECKS",
    "DEFAULT_CHECKS",
    "run",
    "certify",
    "build_report",
]

REPORT_SCHEMA_VERSION = 1
BCD_CHECKS = ("descent", "steps", "subdiff", "length", "critical", "kl")
ADMM_CHECKS = ("phi", "uv", "kkt")
DEFAULT_CHECKS = {
    "bcd": ("descent", "steps", "subdiff", "length", "critical"),
    "admm": ("phi", "uv", "kkt"),
}
CRITICAL_TOL = 1e-6
KKT_TOL = 1e-5


def run(spec, **overrides):
    """Run the algorithm of `spec` with its stored config plus `overrides`."""
    cfg = spec.make_config(**overrides)
    if spec.algorithm == "bcd":
        return bcd.run_bcd(spec.problem, cfg)
    return admm.run_admm(spec.problem, cfg)


def _kl_checks(spec, trace, theta=None, c=None, burn_in=0):
    p = spec.problem
    f_limit = spec.reference["value"] if spec.reference and "value" in spec.reference else float(trace.psi[-1])
    points = trace.points()
    details = {"f_limit": f_limit}
    if theta is None:
        fit = fit_kl_exponent(points, p, f_limit, burn_in=burn_in)
        theta = fit.theta
        details.update(theta_fit=fit.theta, c_fit=fit.c, r2=fit.r2, fit_points=fit.n)
    if c is None or c == "auto":
        gaps, dists = gaps_and_distances(p, points[burn_in:], f_limit)
        d = envelope_desingularizer(gaps, dists, theta)
    else:
        d = Desingularizer(float(c), float(np.clip(theta, 0.0, 1.0 - 1e-6)))
    rep = kl_inequality_along_trace(p, points, f_limit, d, burn_in=burn_in).to_check(d)
    rep.details.update(details)
    return [rep]


def certify(spec, trace, checks=None, theta=None, c=None):
    """Return a list of :class:`CheckReport` for the requested check names."""
    alg = spec.algorithm
    checks = DEFAULT_CHECKS[alg] if checks is None else tuple(checks)
    valid = BCD_CHECKS if alg == "bcd" else ADMM_CHECKS
    bad = [c_ for c_ in checks if c_ not in valid]
    if bad:
        raise ParameterError("checks", f"{bad[0]!r} does not apply to {alg}; choose from {list(valid)}")
    p = spec.problem
    out = []
    if alg == "bcd":
        g, l = trace.gamma, trace.lipschitz
        for name in checks:
            if name == "descent":
                out.append(bcd.check_sufficient_descent(trace, g, l))
            elif name == "steps":
                out.append(bcd.check_step_vanishing(trace))
            elif name == "subdiff":
                out.append(bcd.check_subdiff_bound(p, trace, g, l))
            elif name == "length":
                out.append(bcd.check_finite_length(trace))
            elif name == "critical":
                out.append(bcd.check_limit_criticality(p, trace, CRITICAL_TOL))
            elif name == "kl":
                out.extend(_kl_checks(spec, trace, theta, c))
        return out

    rho, tau = trace.rho, trace.tau
    ref = spec.kkt_reference()
    for name in checks:
        if name == "kkt":
            out.append(admm.check_convergence_to_kkt(p, trace, KKT_TOL))
            continue
        if ref is None:
            out.append(CheckReport(name, admm.TAGS[name], INCONCLUSIVE,
                                   messages=["problem has no KKT reference pair"]))
            continue
        (x1, x2, y), alts = ref
        auxes = [admm.compute_aux(p, trace, (x1, x2, yy)) for yy in [y] + alts]
        if name == "uv":
            out.append(admm.check_uv_membership(p, auxes[0], trace))
        elif name == "phi":
            dev = admm.check_dual_update(trace)
            out.append(CheckReport(
                "dual-update", admm.TAGS["phi"], FAIL if dev > 1e-14 else PASS,
                min_margin=1e-14 - dev, tolerances={"relative": 1e-14},
                messages=[] if dev <= 1e-14 else [f"[{admm.TAGS['phi']}] dual step deviates by {dev:.3g}"],
            ))
            for j, aux in enumerate(auxes):
                suffix = "" if j == 0 else f"[ref{j + 1}]"
                for rep in (admm.check_phi_descent(aux, rho, tau), admm.check_phi_monotone(aux),
                            admm.check_summability(aux, rho, tau)):
                    rep.name += suffix
                    out.append(rep)
    return out


def overall_status(reports):
    return PASS if all(r.status != FAIL for r in reports) else FAIL


def build_report(spec, trace, reports):
    """Machine-readable report; depends only on the problem, trace and checks."""
    info = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "problem": spec.name,
        "algorithm": spec.algorithm,
        "dims": spec.dims,
        "iterations": trace.iterations,
        "stop_reason": trace.stop_reason,
        "status": overall_status(reports),
        "checks": [_clean(r.to_dict()) for r in reports],
    }
    if spec.algorithm == "bcd":
        info["parameters"] = {"gamma": trace.gamma, "lipschitz": trace.lipschitz}
    else:
        info["parameters"] = {"rho": trace.rho, "tau": trace.tau}
    return info


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj
