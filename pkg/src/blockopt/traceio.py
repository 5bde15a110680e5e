"""CSV serialization of BCD and ADMM traces.

Every file has one header row and one row per iterate ``k = 0..K``.
Numbers use 17 significant digits, so reading a file back reproduces the
iterates bit for bit. Column layout:

BCD
    ``k, gamma, l, psi, step, dist, stop`` then ``x_0..x_{n-1}, y_0..y_{m-1}``
ADMM
    ``k, rho, tau, lagrangian, r_norm, dx2, inner1, inner2, sub_residual, stop``
    then ``x1_0.., x2_0.., y_0..``

``step`` is ``||z_k - z_{k-1}||`` and ``dx2`` is ``||A2 (x2_k - x2_{k-1})||``
(both 0 on row 0). ``stop`` is empty except on the last row, where it holds
the stop reason. When the block dimensions add up to more than
:data:`VECTOR_COLUMN_LIMIT` the iterate vectors are replaced by their norms
(``x_norm, y_norm`` or ``x1_norm, x2_norm, y_norm``); a full dump keeps the
vectors regardless.
"""

import csv
import io

import numpy as np

from .admm import AdmmTrace, solver_modes
from .bcd import BcdTrace
from .errors import ParameterError

__all__ = ["VECTOR_COLUMN_LIMIT", "write_trace", "read_trace", "trace_csv"]

VECTOR_COLUMN_LIMIT = 64


def _fmt(v):
    return format(float(v), ".17g")


def _blocks(algorithm):
    return ("x", "y") if algorithm == "bcd" else ("x1", "x2", "y")


def _block_arrays(trace, algorithm):
    return (trace.X, trace.Y) if algorithm == "bcd" else (trace.X1, trace.X2, trace.Y)


def _rows(spec, trace, full):
    alg = spec.algorithm
    arrays = _block_arrays(trace, alg)
    names = _blocks(alg)
    vectors = full or sum(a.shape[1] for a in arrays[:2]) <= VECTOR_COLUMN_LIMIT
    if alg == "bcd":
        head = ["k", "gamma", "l", "psi", "step", "dist", "stop"]
    else:
        head = ["k", "rho", "tau", "lagrangian", "r_norm", "dx2", "inner1", "inner2", "sub_residual", "stop"]
    if vectors:
        head += [f"{b}_{i}" for b, a in zip(names, arrays) for i in range(a.shape[1])]
    else:
        head += [f"{b}_norm" for b in names]
    yield head
    K1 = len(trace)
    for k in range(K1):
        stop = trace.stop_reason if k == K1 - 1 else ""
        if alg == "bcd":
            step = trace.steps[k - 1] if k else 0.0
            row = [str(k), _fmt(trace.gamma), _fmt(trace.lipschitz), _fmt(trace.psi[k]), _fmt(step),
                   _fmt(trace.dist[k]), stop]
        else:
            row = [str(k), _fmt(trace.rho), _fmt(trace.tau), _fmt(trace.lagrangian[k]), _fmt(trace.r_norm[k]),
                   _fmt(trace.dx2[k]), str(int(trace.inner1[k])), str(int(trace.inner2[k])),
                   _fmt(trace.sub_residual[k]), stop]
        if vectors:
            row += [_fmt(v) for a in arrays for v in a[k]]
        else:
            row += [_fmt(np.linalg.norm(a[k])) for a in arrays]
        yield row


def trace_csv(spec, trace, full=False):
    """The CSV text of a trace (see the module docstring for the layout)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(_rows(spec, trace, full))
    return buf.getvalue()


def write_trace(path, spec, trace, full=False):
    with open(path, "w", newline="") as fh:
        fh.write(trace_csv(spec, trace, full))


def _column_block(header, rows, prefix, dim, path):
    cols = [j for j, h in enumerate(header) if h.startswith(prefix + "_") and h[len(prefix) + 1:].isdigit()]
    if not cols:
        raise ParameterError(
            "trace", f"{path} has no iterate columns '{prefix}_*'; vectors were not stored, use the full dump"
        )
    if len(cols) != dim:
        raise ParameterError("trace", f"{path} has {len(cols)} '{prefix}_*' columns but the problem needs {dim}")
    try:
        return np.array([[float(r[j]) for j in cols] for r in rows], dtype=float)
    except (ValueError, IndexError) as exc:
        raise ParameterError("trace", f"{path}: malformed number in '{prefix}' columns ({exc})") from exc


def read_trace(path, spec):
    """Rebuild a trace from CSV; every derived quantity is recomputed from the iterates."""
    try:
        with open(path, newline="") as fh:
            data = list(csv.reader(fh))
    except OSError as exc:
        raise ParameterError("trace", f"cannot read {path}: {exc}") from exc
    if len(data) < 2:
        raise ParameterError("trace", f"{path} has no data rows")
    header, rows = data[0], data[1:]
    col = {h: j for j, h in enumerate(header)}
    p = spec.problem

    def scalar(name, cast=float):
        if name not in col:
            raise ParameterError("trace", f"{path} lacks column {name!r}; is it a {spec.algorithm} trace?")
        try:
            return np.array([cast(r[col[name]]) for r in rows])
        except (ValueError, IndexError) as exc:
            raise ParameterError("trace", f"{path}: malformed value in column {name!r} ({exc})") from exc

    stop = rows[-1][col["stop"]] if "stop" in col and len(rows[-1]) > col["stop"] else ""
    reason = stop or "max_iters"
    if spec.algorithm == "bcd":
        gamma = scalar("gamma")[0]
        l = scalar("l")[0]
        X = _column_block(header, rows, "x", p.n, path)
        Y = _column_block(header, rows, "y", p.m, path)
        return BcdTrace.from_points(p, X, Y, gamma, l, converged=reason == "stop_tol", stop_reason=reason)
    rho = scalar("rho")[0]
    tau = scalar("tau")[0]
    X1 = _column_block(header, rows, "x1", p.n, path)
    X2 = _column_block(header, rows, "x2", p.m, path)
    Y = _column_block(header, rows, "y", p.p, path)
    return AdmmTrace.from_points(
        p, X1, X2, Y, rho, tau, scalar("inner1", int), scalar("inner2", int), scalar("sub_residual"),
        modes=solver_modes(p, rho), converged=reason == "tolerance", stop_reason=reason,
    )
