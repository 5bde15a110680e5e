"""Command-line harness: run solvers, certify traces, query oracles.

Exit codes: 0 pass, 1 certificate failure, 2 input error, 3 solver failure.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import certify as cert
from .errors import BlockoptError, SolverError
from .problems import BUILTINS, builtin, load_problem
from .prox import Zero, atom_from_dict, prox, prox_oracle_1d
from .report import FAIL
from .smooth import CallableSmooth
from .subdiff import StructuredFn, distance_to_subdiff, grad_fd_check, subdiff_distance_via_atom
from .traceio import read_trace, write_trace

EXIT_OK, EXIT_CERT, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3
SEED_ENV = "BLOCKOPT_SEED"


def _floats(text):
    try:
        return np.array([float(t) for t in text.split(",") if t.strip()], dtype=float)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _check_list(text):
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _effective_seed(args):
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return None
    try:
        return int(env)
    except ValueError:
        raise BlockoptError(f"{SEED_ENV}: must be an integer (got {env!r})")


def _load(name, seed):
    if name in BUILTINS and not os.path.exists(name):
        return builtin(name, seed)
    spec = load_problem(name)
    if seed is not None and spec.algorithm == "bcd":
        spec = spec.with_config(seed=seed)
    return spec


def _numbered(path, name, many):
    if path is None or not many:
        return path
    root, ext = os.path.splitext(path)
    return f"{root}.{name}{ext}"


def _emit_reports(reports, out):
    for r in reports:
        out.append(str(r))
        if r.status == FAIL:
            out.extend("  " + m for m in r.messages[:5])


def _run_one(algorithm, problem, opts, many):
    """One run job; returns ``(exit code, output lines)``. Runs in a worker process."""
    out = []
    try:
        seed = opts["seed"]
        spec = _load(problem, seed)
        if spec.algorithm != algorithm:
            return EXIT_INPUT, [f"error: {problem} is a {spec.algorithm} problem; use run-{spec.algorithm}"]
        if algorithm == "bcd":
            over = {"gamma": opts.get("gamma"), "max_iters": opts["max_iters"], "stop_tol": opts["tol"]}
        else:
            over = {"rho": opts.get("rho"), "tau": opts.get("tau"), "max_iters": opts["max_iters"],
                    "primal_tol": opts["tol"], "dual_tol": opts["tol"]}
        spec = spec.with_config(**over)
        spec.make_config()
        trace = cert.run(spec)
    except SolverError as exc:
        return EXIT_SOLVER, [f"solver failure: {exc}"]
    except (BlockoptError, ValueError, TypeError) as exc:
        return EXIT_INPUT, [f"error: {exc}"]

    out.append(f"{spec.name}: {trace.iterations} iterations ({trace.stop_reason})")
    try:
        trace_path = _numbered(opts["trace"], spec.name, many)
        if trace_path:
            write_trace(trace_path, spec, trace)
        dump_path = _numbered(opts["full_dump"], spec.name, many)
        if dump_path:
            write_trace(dump_path, spec, trace, full=True)
        reports = cert.certify(spec, trace) if opts["certify"] else []
        _emit_reports(reports, out)
        report_path = _numbered(opts["report"], spec.name, many)
        if report_path:
            with open(report_path, "w") as fh:
                json.dump(cert.build_report(spec, trace, reports), fh, indent=1)
    except OSError as exc:
        return EXIT_INPUT, out + [f"error: {exc}"]
    except BlockoptError as exc:
        return EXIT_INPUT, out + [f"error: {exc}"]
    if any(r.status == FAIL for r in reports):
        return EXIT_CERT, out
    return EXIT_OK, out


def cmd_run(args, algorithm):
    seed = _effective_seed(args)
    opts = {
        "seed": seed, "max_iters": args.max_iters, "tol": args.tol, "trace": args.trace,
        "full_dump": args.full_dump, "report": args.report, "certify": args.certify,
        "gamma": getattr(args, "gamma", None), "rho": getattr(args, "rho", None), "tau": getattr(args, "tau", None),
    }
    problems = args.problem
    many = len(problems) > 1
    if args.jobs > 1 and many:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(_run_one, [algorithm] * len(problems), problems, [opts] * len(problems),
                                  [many] * len(problems)))
    else:
        results = [_run_one(algorithm, p, opts, many) for p in problems]
    for code, lines in results:
        stream = sys.stdout if code in (EXIT_OK, EXIT_CERT) else sys.stderr
        for line in lines:
            print(line, file=stream)
    return max(code for code, _ in results)


def cmd_verify(args):
    try:
        spec = _load(args.problem, _effective_seed(args))
        trace = read_trace(args.trace, spec)
        c = args.c
        if c is not None and c != "auto":
            c = float(c)
        reports = cert.certify(spec, trace, args.checks, theta=args.theta, c=c)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (BlockoptError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    out = []
    _emit_reports(reports, out)
    for line in out:
        print(line)
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(cert.build_report(spec, trace, reports), fh, indent=1)
    return EXIT_CERT if any(r.status == FAIL for r in reports) else EXIT_OK


def _atom_from_args(args):
    d = {"tag": args.atom}
    if args.lam is not None:
        d["lambda"] = args.lam
    if args.atom == "box":
        d["lo"], d["hi"] = args.lo, args.hi
    return atom_from_dict(d)


def cmd_oracle(args):
    try:
        if args.kind == "prox":
            return _oracle_prox(args)
        if args.kind == "grad":
            return _oracle_grad(args)
        return _oracle_subdiff(args)
    except (BlockoptError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def _oracle_prox(args):
    atom = _atom_from_args(args)
    x = args.x
    analytic = prox(atom, args.t, x).point
    f = atom.scalar_fn()
    grid = []
    for xi in x:
        lo, hi = None, None
        if args.atom == "box":
            # the window must reach the box even when x lies far outside it
            lo = min(args.lo, xi) - 1.0
            hi = max(args.hi, xi) + 1.0
        grid.append(prox_oracle_1d(lambda u: args.t * f(u), xi, lo, hi, step=args.step))
    grid = np.array(grid)
    diff = float(np.max(np.abs(analytic - grid)))
    print(f"analytic: {_vec_str(analytic)}")
    print(f"grid:     {_vec_str(grid)}")
    print(f"max |difference|: {diff:.3g} (grid step {args.step:g})")
    return EXIT_OK if diff <= 2 * args.step else EXIT_CERT


def _oracle_grad(args):
    name = args.builtin or args.problem
    if name is None:
        raise BlockoptError("grad: give --builtin NAME or --problem FILE")
    spec = _load(name, _effective_seed(args))
    p = spec.problem
    if spec.algorithm == "bcd":
        smooth = p.H.joint(p.n)
        dim = p.n + p.m
    else:
        smooth = p.smooth1 if args.block == 1 else p.smooth2
        dim = p.n if args.block == 1 else p.m
        if smooth is None:
            raise BlockoptError(f"grad: block {args.block} of {spec.name} has no smooth part")
    x = args.x if args.x is not None else np.random.default_rng(args.seed or 0).standard_normal(dim)
    if x.size != dim:
        raise BlockoptError(f"grad: --x needs {dim} entries (got {x.size})")
    F = StructuredFn(Zero(), CallableSmooth(smooth.value, smooth.grad))
    err = grad_fd_check(F, x, h=args.h)
    print(f"finite-difference vs analytic gradient, relative error: {err:.3g}")
    return EXIT_OK if err < 1e-6 else EXIT_CERT


def _oracle_subdiff(args):
    atom = _atom_from_args(args)
    x = args.x
    u = np.zeros_like(x) if args.u is None else args.u
    F = StructuredFn(atom)
    d1 = distance_to_subdiff(F, x, u)
    # second route: dist(0, d(atom - <u, .>)) via clamping
    shifted = StructuredFn(atom, CallableSmooth(lambda z: -float(np.dot(u, z)), lambda z: -u))
    d2 = subdiff_distance_via_atom(shifted, x)
    print(f"interval route: {d1}")
    print(f"clamp route:    {d2}")
    if not isinstance(d1, float):
        return EXIT_OK
    diff = abs(d1 - d2)
    print(f"difference: {diff:.3g}")
    return EXIT_OK if diff <= 1e-12 * max(1.0, d1) else EXIT_CERT


def _vec_str(v):
    return ", ".join(format(float(t), ".10g") for t in v)


def cmd_list(args):
    for name in BUILTINS:
        spec = builtin(name)
        dims = " ".join(f"{k}={v}" for k, v in spec.dims.items())
        print(f"{name:16s} {spec.algorithm:5s} {dims:18s} {spec.description}")
        if args.export:
            os.makedirs(args.export, exist_ok=True)
            spec.save(os.path.join(args.export, f"{name}.json"))
    return EXIT_OK


def _add_run_args(sp, algorithm):
    sp.add_argument("--problem", action="append", required=True,
                    help="problem file or built-in name (repeatable)")
    sp.add_argument("--jobs", type=int, default=1, help="run several problems in parallel")
    if algorithm == "bcd":
        sp.add_argument("--gamma", type=float)
    else:
        sp.add_argument("--rho", type=float)
        sp.add_argument("--tau", type=float)
    sp.add_argument("--max-iters", type=int)
    sp.add_argument("--tol", type=float, help="stop tolerance (bcd: step test, admm: primal and dual residuals)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--trace", help="trace CSV output")
    sp.add_argument("--full-dump", help="trace CSV with iterate vectors regardless of size")
    sp.add_argument("--report", help="JSON report output")
    sp.add_argument("--certify", action="store_true", help="run the certificate suite")


def build_parser():
    ap = argparse.ArgumentParser(prog="blockopt", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    _add_run_args(sub.add_parser("run-bcd", help="alternating proximal linearized descent"), "bcd")
    _add_run_args(sub.add_parser("run-admm", help="two-block ADMM"), "admm")

    v = sub.add_parser("verify", help="re-run certificates on a stored trace")
    v.add_argument("--trace", required=True)
    v.add_argument("--problem", required=True)
    v.add_argument("--checks", type=_check_list,
                   help="comma list from descent,steps,subdiff,length,critical,kl (bcd) or phi,uv,kkt (admm)")
    v.add_argument("--theta", type=float, help="KL exponent (fitted when omitted)")
    v.add_argument("--c", help="KL constant or 'auto' for the tightest envelope")
    v.add_argument("--seed", type=int)
    v.add_argument("--report")

    o = sub.add_parser("oracle", help="compare analytic results with brute-force oracles")
    o.add_argument("kind", choices=["prox", "grad", "subdiff-dist"])
    o.add_argument("--atom", default="zero", help="zero, l1, sql2, nonneg or box")
    o.add_argument("--lambda", dest="lam", type=float)
    o.add_argument("--lo", type=float)
    o.add_argument("--hi", type=float)
    o.add_argument("--t", type=float, default=1.0)
    o.add_argument("--x", type=_floats)
    o.add_argument("--u", type=_floats)
    o.add_argument("--step", type=float, default=1e-5, help="grid step of the prox oracle")
    o.add_argument("--h", type=float, default=1e-5, help="finite-difference step")
    o.add_argument("--builtin")
    o.add_argument("--problem")
    o.add_argument("--block", type=int, choices=[1, 2], default=1)
    o.add_argument("--seed", type=int)

    lp = sub.add_parser("list-problems", help="list built-in problems")
    lp.add_argument("--export", metavar="DIR", help="also write each built-in as a JSON problem file")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run-bcd":
            return cmd_run(args, "bcd")
        if args.command == "run-admm":
            return cmd_run(args, "admm")
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "oracle":
            if args.kind in ("prox", "subdiff-dist") and args.x is None:
                print("error: --x is required", file=sys.stderr)
                return EXIT_INPUT
            return cmd_oracle(args)
        return cmd_list(args)
    except BlockoptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
