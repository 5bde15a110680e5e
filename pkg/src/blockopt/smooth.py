"""Differentiable pieces: single-block smooth functions and two-block couplings."""

import numpy as np

from .core import LinOp, as_vec, make_rng, op_norm_estimate
from .errors import DimensionError, ParameterError

__all__ = [
    "SmoothFn",
    "CallableSmooth",
    "LeastSquares",
    "smooth_from_dict",
    "SmoothCoupling",
    "QuadraticCoupling",
    "CallableCoupling",
    "coupling_from_dict",
    "LIPSCHITZ_SAFETY",
]

LIPSCHITZ_SAFETY = 1.01


class SmoothFn:
    """Interface: ``value(x)``, ``grad(x)`` and a gradient Lipschitz bound."""

    lipschitz = None
    hessian = None

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError


class CallableSmooth(SmoothFn):
    def __init__(self, value, grad, lipschitz=None, hessian=None):
        self._value = value
        self._grad = grad
        self.lipschitz = lipschitz
        self.hessian = hessian

    def value(self, x):
        return float(self._value(x))

    def grad(self, x):
        return np.asarray(self._grad(x), dtype=float)


class LeastSquares(SmoothFn):
    """``weight/2 * ||M x - c||^2``."""

    def __init__(self, M, c, weight=1.0):
        self.M = M if isinstance(M, LinOp) else LinOp(M)
        self.c = as_vec(c, dim=self.M.rows, name="c")
        self.weight = float(weight)
        if not self.weight > 0:
            raise ParameterError("weight", "must be positive")
        self.hessian = self.weight * self.M.gram()
        self.lipschitz = float(np.linalg.eigvalsh(self.hessian)[-1]) if self.M.cols else 0.0

    def value(self, x):
        r = self.M.apply(x) - self.c
        return 0.5 * self.weight * float(np.dot(r, r))

    def grad(self, x):
        return self.weight * self.M.adjoint_apply(self.M.apply(x) - self.c)

    def to_dict(self):
        return {
            "kind": "least_squares",
            "weight": self.weight,
            "M": _matrix_dict(self.M),
            "c": self.c.tolist(),
        }


def _matrix_dict(op):
    return {"rows": op.rows, "cols": op.cols, "data": op.matrix.ravel().tolist()}


def _matrix_from(d, field):
    try:
        return LinOp.from_rows(int(d["rows"]), int(d["cols"]), d["data"])
    except (KeyError, TypeError) as exc:
        raise ParameterError(field, "matrix needs 'rows', 'cols' and row-major 'data'") from exc
    except DimensionError as exc:
        raise ParameterError(field, str(exc)) from exc


def smooth_from_dict(d, field="smooth"):
    if d is None:
        return None
    if d.get("kind") != "least_squares":
        raise ParameterError(f"{field}.kind", "only 'least_squares' is supported")
    M = _matrix_from(d.get("M", {}), f"{field}.M")
    c = d.get("c")
    if c is None or len(c) != M.rows:
        raise ParameterError(f"{field}.c", f"must have {M.rows} entries")
    return LeastSquares(M, c, d.get("weight", 1.0))


class SmoothCoupling:
    """Two-block smooth term ``H(x, y)`` with an l-Lipschitz full gradient."""

    lipschitz = None

    def value(self, x, y):
        raise NotImplementedError

    def grad_x(self, x, y):
        raise NotImplementedError

    def grad_y(self, x, y):
        raise NotImplementedError

    def partial_x(self, y):
        """``x -> H(x, y)`` as a :class:`SmoothFn`."""
        return CallableSmooth(lambda x: self.value(x, y), lambda x: self.grad_x(x, y))

    def partial_y(self, x):
        return CallableSmooth(lambda y: self.value(x, y), lambda y: self.grad_y(x, y))

    def joint(self, n):
        """``z -> H(z[:n], z[n:])`` as a :class:`SmoothFn` on the stacked vector."""
        return CallableSmooth(
            lambda z: self.value(z[:n], z[n:]),
            lambda z: np.concatenate([self.grad_x(z[:n], z[n:]), self.grad_y(z[:n], z[n:])]),
            lipschitz=self.lipschitz,
        )


class QuadraticCoupling(SmoothCoupling):
    """``H(x, y) = 0.5 * ||A x + B y - c||^2``.

    When `lipschitz` is not given it is estimated as
    ``1.01 * ||[A B]||^2`` from power iteration.
    """

    def __init__(self, A, B, c, lipschitz=None, rng=0):
        self.A = A if isinstance(A, LinOp) else LinOp(A)
        self.B = B if isinstance(B, LinOp) else LinOp(B)
        if self.A.rows != self.B.rows:
            raise DimensionError(f"coupling: A has {self.A.rows} rows, B has {self.B.rows}")
        self.c = as_vec(c, dim=self.A.rows, name="c")
        if lipschitz is None:
            AB = np.hstack([self.A.matrix, self.B.matrix])
            sigma = op_norm_estimate(AB, 500, make_rng(rng))
            lipschitz = LIPSCHITZ_SAFETY * sigma**2
            self.lipschitz_estimated = True
        else:
            self.lipschitz_estimated = False
        lipschitz = float(lipschitz)
        if not lipschitz > 0:
            raise ParameterError("lipschitz", "must be positive")
        self.lipschitz = lipschitz

    @property
    def n(self):
        return self.A.cols

    @property
    def m(self):
        return self.B.cols

    def residual(self, x, y):
        return self.A.apply(x) + self.B.apply(y) - self.c

    def value(self, x, y):
        r = self.residual(x, y)
        return 0.5 * float(np.dot(r, r))

    def grad_x(self, x, y):
        return self.A.adjoint_apply(self.residual(x, y))

    def grad_y(self, x, y):
        return self.B.adjoint_apply(self.residual(x, y))

    def to_dict(self):
        return {
            "kind": "quadratic",
            "A": _matrix_dict(self.A),
            "B": _matrix_dict(self.B),
            "c": self.c.tolist(),
            "lipschitz": self.lipschitz,
        }


class CallableCoupling(SmoothCoupling):
    def __init__(self, value, grad_x, grad_y, lipschitz):
        self._value, self._gx, self._gy = value, grad_x, grad_y
        self.lipschitz = float(lipschitz)
        if not self.lipschitz > 0:
            raise ParameterError("lipschitz", "must be positive")

    def value(self, x, y):
        return float(self._value(x, y))

    def grad_x(self, x, y):
        return np.asarray(self._gx(x, y), dtype=float)

    def grad_y(self, x, y):
        return np.asarray(self._gy(x, y), dtype=float)


def coupling_from_dict(d):
    if not isinstance(d, dict) or d.get("kind") != "quadratic":
        raise ParameterError("coupling.kind", "only 'quadratic' is supported")
    A = _matrix_from(d.get("A", {}), "coupling.A")
    B = _matrix_from(d.get("B", {}), "coupling.B")
    c = d.get("c")
    if c is None or len(c) != A.rows:
        raise ParameterError("coupling.c", f"must have {A.rows} entries")
    if B.rows != A.rows:
        raise ParameterError("coupling.B", f"must have {A.rows} rows like A")
    return QuadraticCoupling(A, B, c, lipschitz=d.get("lipschitz"))
