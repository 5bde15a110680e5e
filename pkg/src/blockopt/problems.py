"""Problem definitions: the built-in library and the JSON problem format.

A problem file is one JSON object::

    {
      "schema_version": 1,
      "name": "lasso-bcd",
      "algorithm": "bcd",                       # or "admm"
      "dims": {"n": 20, "m": 20},               # admm adds "p"
      # bcd
      "f": {"tag": "l1", "lambda": 0.3}, "g": {...},
      "coupling": {"kind": "quadratic", "A": MAT, "B": MAT, "c": [...], "lipschitz": 12.0},
      # admm
      "f1": ATOM, "f2": ATOM, "A1": MAT, "A2": MAT, "b": [...],
      "smooth1": {"kind": "least_squares", "M": MAT, "c": [...], "weight": 1.0},   # optional
      "smooth2": ...,                                                             # optional
      "feasible_point": {"x1": [...], "x2": [...]},                               # optional
      "config": {...},                          # keyword arguments of BcdConfig / AdmmConfig
      "reference": {...}                        # optional known solution
    }

``MAT`` is ``{"rows": r, "cols": c, "data": [row-major floats]}``. Any
matrix or vector may instead be ``{"file": "path"}``; ``.json`` files hold
the inline form and anything else is read with ``numpy.loadtxt``. Paths
are relative to the problem file.

BCD references are ``{"x", "y", "value"}``; ADMM references are
``{"x1", "x2", "y"}`` plus an optional list ``"alt_y"`` of further valid
multipliers.
"""

import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import reference as ref
from .admm import AdmmConfig, AdmmProblem, kkt_check
from .bcd import BcdConfig, BcdProblem
from .core import LinOp, random_instance
from .errors import DimensionError, ParameterError
from .prox import L1, IndNonneg, Zero, atom_from_dict
from .smooth import LeastSquares, QuadraticCoupling, coupling_from_dict, smooth_from_dict

__all__ = [
    "SCHEMA_VERSION",
    "ProblemSpec",
    "BUILTINS",
    "builtin",
    "load_problem",
    "problem_from_dict",
]

SCHEMA_VERSION = 1
ALGORITHMS = ("bcd", "admm")
BCD_CONFIG_KEYS = {"gamma", "max_iters", "stop_tol", "seed", "x0", "y0", "bound_factor"}
ADMM_CONFIG_KEYS = {
    "rho", "tau", "max_iters", "primal_tol", "dual_tol", "inner_tol", "max_inner", "x1_0", "x2_0", "y0", "seed",
}


def _vec_list(v):
    return None if v is None else [float(t) for t in np.asarray(v, float).ravel()]


@dataclass
class ProblemSpec:
    """A problem, its default run configuration and an optional reference solution."""

    name: str
    algorithm: str
    problem: object
    config: dict = field(default_factory=dict)
    reference: dict = None
    description: str = ""

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ParameterError("algorithm", f"must be one of {ALGORITHMS}")
        self.make_config()

    @property
    def dims(self):
        p = self.problem
        if self.algorithm == "bcd":
            return {"n": p.n, "m": p.m}
        return {"n": p.n, "m": p.m, "p": p.p}

    def make_config(self, **overrides):
        """Validated BcdConfig / AdmmConfig from the stored config plus overrides."""
        cfg = dict(self.config)
        cfg.update({k: v for k, v in overrides.items() if v is not None})
        allowed = BCD_CONFIG_KEYS if self.algorithm == "bcd" else ADMM_CONFIG_KEYS
        unknown = sorted(set(cfg) - allowed)
        if unknown:
            raise ParameterError(f"config.{unknown[0]}", f"unknown key for algorithm {self.algorithm!r}")
        if self.algorithm == "bcd":
            return BcdConfig(**cfg)
        cfg.pop("seed", None)
        return AdmmConfig(**cfg)

    def with_config(self, **overrides):
        cfg = dict(self.config)
        cfg.update({k: v for k, v in overrides.items() if v is not None})
        return replace(self, config=cfg)

    def kkt_reference(self):
        """``(x1, x2, y)`` and the list of alternative multipliers, or None."""
        if self.algorithm != "admm" or not self.reference:
            return None
        r = self.reference
        return (np.asarray(r["x1"], float), np.asarray(r["x2"], float), np.asarray(r["y"], float)), [
            np.asarray(y, float) for y in r.get("alt_y", [])
        ]

    def to_dict(self):
        p = self.problem
        d = {"schema_version": SCHEMA_VERSION, "name": self.name, "algorithm": self.algorithm,
             "description": self.description, "dims": self.dims}
        if self.algorithm == "bcd":
            if not hasattr(p.H, "to_dict"):
                raise ParameterError("coupling", "only quadratic couplings can be serialized")
            d.update(f=p.f.to_dict(), g=p.g.to_dict(), coupling=p.H.to_dict())
        else:
            d.update(
                f1=p.f1.to_dict(), f2=p.f2.to_dict(),
                A1=_mat(p.A1), A2=_mat(p.A2), b=_vec_list(p.b),
            )
            for k in ("smooth1", "smooth2"):
                s = getattr(p, k)
                if s is not None:
                    d[k] = s.to_dict()
            if p.feasible_point is not None:
                d["feasible_point"] = {"x1": _vec_list(p.feasible_point[0]), "x2": _vec_list(p.feasible_point[1])}
        d["config"] = {k: (_vec_list(v) if isinstance(v, (list, np.ndarray)) else v) for k, v in self.config.items()}
        if self.reference is not None:
            d["reference"] = {
                k: (v if np.isscalar(v) else [_vec_list(t) for t in v] if k == "alt_y" else _vec_list(v))
                for k, v in self.reference.items()
            }
        return d

    def dumps(self):
        return json.dumps(self.to_dict(), indent=1)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())


def _mat(op):
    return {"rows": op.rows, "cols": op.cols, "data": op.matrix.ravel().tolist()}


def _resolve_files(obj, base, path="problem"):
    """Replace ``{"file": ...}`` leaves by their loaded contents."""
    if isinstance(obj, dict):
        if set(obj) == {"file"}:
            fname = os.path.join(base, obj["file"])
            try:
                if fname.endswith(".json"):
                    with open(fname) as fh:
                        return json.load(fh)
                arr = np.loadtxt(fname, ndmin=1)
            except (OSError, ValueError) as exc:
                raise ParameterError(path, f"cannot read {fname}: {exc}") from exc
            if arr.ndim == 2:
                return {"rows": arr.shape[0], "cols": arr.shape[1], "data": arr.ravel().tolist()}
            return arr.tolist()
        return {k: _resolve_files(v, base, f"{path}.{k}" if path != "problem" else k) for k, v in obj.items()}
    return obj


def _req(d, key):
    if key not in d:
        raise ParameterError(key, "missing required field")
    return d[key]


def _matrix(d, key):
    m = _req(d, key)
    try:
        return LinOp.from_rows(int(m["rows"]), int(m["cols"]), m["data"])
    except (KeyError, TypeError) as exc:
        raise ParameterError(key, "matrix needs 'rows', 'cols' and row-major 'data'") from exc
    except (DimensionError, ValueError) as exc:
        raise ParameterError(key, str(exc)) from exc


def _vector(d, key, dim):
    v = _req(d, key)
    try:
        arr = np.asarray(v, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParameterError(key, "must be a list of numbers") from exc
    if arr.ndim != 1 or arr.size != dim:
        raise ParameterError(key, f"must have {dim} entries (got {arr.size})")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(key, "entries must be finite")
    return arr


def _atom(d, key):
    try:
        return atom_from_dict(_req(d, key))
    except ParameterError as exc:
        raise ParameterError(f"{key}.{exc.field.split('.')[-1]}", exc.constraint) from exc


def _dim(dims, key):
    try:
        v = int(dims[key])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParameterError(f"dims.{key}", "missing or not an integer") from exc
    if v <= 0:
        raise ParameterError(f"dims.{key}", "must be positive")
    return v


def problem_from_dict(d, base="."):
    """Build a :class:`ProblemSpec`; errors name the offending field."""
    if not isinstance(d, dict):
        raise ParameterError("problem", "must be a JSON object")
    version = d.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ParameterError("schema_version", f"unsupported version {version}; expected {SCHEMA_VERSION}")
    d = _resolve_files(d, base)
    algorithm = _req(d, "algorithm")
    if algorithm not in ALGORITHMS:
        raise ParameterError("algorithm", f"must be one of {ALGORITHMS}")
    dims = _req(d, "dims")
    n, m = _dim(dims, "n"), _dim(dims, "m")
    if algorithm == "bcd":
        H = coupling_from_dict(_req(d, "coupling"))
        if H.n != n:
            raise ParameterError("coupling.A", f"must have {n} columns (dims.n)")
        if H.m != m:
            raise ParameterError("coupling.B", f"must have {m} columns (dims.m)")
        f, g = _atom(d, "f"), _atom(d, "g")
        _check_atom_dim(f, n, "f")
        _check_atom_dim(g, m, "g")
        problem = BcdProblem(f, g, H, n, m)
    else:
        p = _dim(dims, "p")
        A1, A2 = _matrix(d, "A1"), _matrix(d, "A2")
        for key, A, cols in (("A1", A1, n), ("A2", A2, m)):
            if A.shape != (p, cols):
                raise ParameterError(key, f"must be {p} x {cols} (got {A.rows} x {A.cols})")
        b = _vector(d, "b", p)
        s1, s2 = smooth_from_dict(d.get("smooth1"), "smooth1"), smooth_from_dict(d.get("smooth2"), "smooth2")
        for key, s, cols in (("smooth1", s1, n), ("smooth2", s2, m)):
            if s is not None and s.M.cols != cols:
                raise ParameterError(f"{key}.M", f"must have {cols} columns")
        f1, f2 = _atom(d, "f1"), _atom(d, "f2")
        _check_atom_dim(f1, n, "f1")
        _check_atom_dim(f2, m, "f2")
        fp = d.get("feasible_point")
        if fp is not None:
            fp = (_vector(fp, "x1", n), _vector(fp, "x2", m))
        problem = AdmmProblem(f1, f2, A1, A2, b, s1, s2, fp)
    config = d.get("config", {}) or {}
    if not isinstance(config, dict):
        raise ParameterError("config", "must be an object")
    reference = d.get("reference")
    spec = ProblemSpec(
        name=str(d.get("name", "problem")), algorithm=algorithm, problem=problem,
        config=dict(config), reference=reference, description=str(d.get("description", "")),
    )
    if algorithm == "admm" and reference is not None:
        _validate_admm_reference(spec)
    return spec


def _check_atom_dim(atom, dim, key):
    lo = getattr(atom, "lo", None)
    if lo is not None and np.size(lo) not in (1, dim):
        raise ParameterError(f"{key}.lo", f"must have 1 or {dim} entries")


def _validate_admm_reference(spec):
    p = spec.problem
    r = spec.reference
    for key, dim in (("x1", p.n), ("x2", p.m), ("y", p.p)):
        _vector(r, key, dim)
    (x1, x2, y), alts = spec.kkt_reference()
    for j, yy in enumerate([y] + alts):
        res = kkt_check(p, x1, x2, yy, 1e-8)
        if not res:
            key = "reference.y" if j == 0 else f"reference.alt_y[{j - 1}]"
            raise ParameterError(
                key,
                f"reference is not a KKT pair (primal {res.primal:.3g}, dual1 {res.dual1:.3g}, "
                f"dual2 {res.dual2:.3g} at tol 1e-8)",
            )


def load_problem(path_or_name, seed=None):
    """Load a problem file, or a built-in by name."""
    if path_or_name in BUILTINS and not os.path.exists(path_or_name):
        return builtin(path_or_name, seed)
    try:
        with open(path_or_name) as fh:
            d = json.load(fh)
    except FileNotFoundError as exc:
        raise ParameterError(
            "problem", f"no such file or built-in problem {path_or_name!r}; built-ins: {sorted(BUILTINS)}"
        ) from exc
    except json.JSONDecodeError as exc:
        raise ParameterError("problem", f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return problem_from_dict(d, os.path.dirname(os.path.abspath(path_or_name)))


# ---------------------------------------------------------------- built-ins


def _quadratic(seed):
    n = m = 20
    A = np.vstack([np.eye(n), np.zeros((m, n))])
    B = np.vstack([np.zeros((n, m)), np.eye(m)])
    H = QuadraticCoupling(A, B, np.zeros(n + m), lipschitz=1.0)
    x0 = np.linspace(-1.0, 1.0, n)
    y0 = np.linspace(0.5, -1.5, m)
    return ProblemSpec(
        "quadratic", "bcd", BcdProblem(Zero(), Zero(), H, n, m),
        config={"gamma": 2.0, "max_iters": 5000, "stop_tol": None, "seed": seed, "x0": x0.tolist(), "y0": y0.tolist()},
        reference={"x": [0.0] * n, "y": [0.0] * m, "value": 0.0},
        description="0.5*||x||^2 + 0.5*||y||^2 with l = 1 (strongly convex)",
    )


def _lasso_bcd(seed):
    n = m = 20
    d = random_instance("lasso-bcd", (n, m, 50), seed)
    H = QuadraticCoupling(d["A"], d["B"], d["c"])
    lam = d["lam"]
    AB = np.hstack([d["A"], d["B"]])
    z = ref.solve_lasso(AB, d["c"], lam)
    value = 0.5 * float(np.sum((AB @ z - d["c"]) ** 2)) + lam * float(np.sum(np.abs(z)))
    return ProblemSpec(
        "lasso-bcd", "bcd", BcdProblem(L1(lam), L1(lam), H, n, m),
        config={"gamma": 2.0, "max_iters": 5000, "stop_tol": None, "seed": seed},
        reference={"x": z[:n].tolist(), "y": z[n:].tolist(), "value": value},
        description="lam*||x||_1 + lam*||y||_1 + 0.5*||Ax + By - c||^2, A, B 50 x 20",
    )


def _consensus_data(seed):
    d = random_instance("lasso", (50, 50, 20), seed)
    x = ref.solve_lasso(d["A"], d["c"], d["lam"])
    return d["A"], d["c"], d["lam"], x


_ADMM_DEFAULTS = {"rho": 1.0, "tau": 1.0, "max_iters": 5000, "primal_tol": 1e-9, "dual_tol": 1e-9}


def _consensus_lasso(seed):
    A, c, lam, x = _consensus_data(seed)
    n = A.shape[1]
    I = np.eye(n)
    p = AdmmProblem(Zero(), L1(lam), I, -I, np.zeros(n), smooth1=LeastSquares(A, c), feasible_point=(x, x))
    y = ref.lasso_multiplier(A, c, x)
    return ProblemSpec(
        "consensus-lasso", "admm", p, config={**_ADMM_DEFAULTS, "seed": seed},
        reference={"x1": x.tolist(), "x2": x.tolist(), "y": y.tolist()},
        description="0.5*||A x1 - c||^2 + lam*||x2||_1 s.t. x1 - x2 = 0, A 20 x 50",
    )


def _rank_deficient(seed):
    A, c, lam, x = _consensus_data(seed)
    n = A.shape[1]
    I = np.eye(n)
    p = AdmmProblem(
        Zero(), L1(lam), np.vstack([I, I]), np.vstack([-I, -I]), np.zeros(2 * n),
        smooth1=LeastSquares(A, c), feasible_point=(x, x),
    )
    s = ref.lasso_multiplier(A, c, x)
    # the constraint rows are duplicated, so any split of s across them is a multiplier
    return ProblemSpec(
        "rank-deficient", "admm", p, config={**_ADMM_DEFAULTS, "seed": seed},
        reference={
            "x1": x.tolist(), "x2": x.tolist(), "y": np.concatenate([s / 2, s / 2]).tolist(),
            "alt_y": [np.concatenate([s, 0 * s]).tolist()],
        },
        description="consensus lasso with every constraint row duplicated (non-unique multiplier)",
    )


def _basis_pursuit(seed):
    n, q = 50, 20
    d = random_instance("basis-pursuit", (n, n, q), seed)
    A, c = d["A"], d["c"]
    x, nu = ref.solve_basis_pursuit(A, c)
    A1 = np.vstack([np.eye(n), A])
    A2 = np.vstack([-np.eye(n), np.zeros((q, n))])
    b = np.concatenate([np.zeros(n), c])
    p = AdmmProblem(Zero(), L1(1.0), A1, A2, b, feasible_point=(x, x))
    return ProblemSpec(
        "basis-pursuit", "admm", p, config={**_ADMM_DEFAULTS, "seed": seed},
        reference={"x1": x.tolist(), "x2": x.tolist(), "y": np.concatenate([A.T @ nu, -nu]).tolist()},
        description="min ||x2||_1 s.t. x1 - x2 = 0, A x1 = c, A 20 x 50",
    )


def _nonneg_lasso(seed):
    d = random_instance("lasso", (30, 30, 20), seed)
    A, c, lam = d["A"], d["c"], d["lam"]
    x = ref.solve_nonneg_lasso(A, c, lam)
    n = A.shape[1]
    I = np.eye(n)
    p = AdmmProblem(IndNonneg(), L1(lam), I, -I, np.zeros(n), smooth1=LeastSquares(A, c), feasible_point=(x, x))
    return ProblemSpec(
        "nonneg-lasso", "admm", p,
        config={**_ADMM_DEFAULTS, "max_iters": 2000, "inner_tol": 1e-10, "seed": seed},
        reference={"x1": x.tolist(), "x2": x.tolist(), "y": [lam] * n},
        description="0.5*||A x1 - c||^2 + [x1 >= 0] + lam*||x2||_1 s.t. x1 = x2 (iterative x1-step)",
    )


BUILTINS = {
    "quadratic": _quadratic,
    "lasso-bcd": _lasso_bcd,
    "consensus-lasso": _consensus_lasso,
    "basis-pursuit": _basis_pursuit,
    "rank-deficient": _rank_deficient,
    "nonneg-lasso": _nonneg_lasso,
}
DEFAULT_SEED = 0


def builtin(name, seed=None):
    """Instantiate a built-in problem; `seed` controls its random data and BCD start."""
    if name not in BUILTINS:
        raise ParameterError("problem", f"unknown built-in {name!r}; expected one of {sorted(BUILTINS)}")
    seed = DEFAULT_SEED if seed is None else int(seed)
    return BUILTINS[name](seed)
