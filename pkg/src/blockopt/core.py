"""Numeric building blocks: vectors, two-block points, dense operators, RNG.

Vectors are plain one-dimensional float64 numpy arrays; :func:`as_vec`
is the single gate that validates dimension and finiteness.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError

__all__ = [
    "as_vec",
    "BlockPair",
    "block_norm",
    "LinOp",
    "make_rng",
    "op_norm_estimate",
    "smallest_singular_value",
    "random_instance",
    "INSTANCE_KINDS",
]


def as_vec(x, dim=None, name="vector"):
    """Return `x` as a read-only finite float64 vector.

    Raises
    ------
    DimensionError
        If `x` is not one-dimensional or its length differs from `dim`.
    ValueError
        If any entry is NaN or infinite.
    """
    v = np.array(x, dtype=np.float64, copy=True)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise DimensionError(f"{name}: expected a 1-D vector, got shape {v.shape}")
    if v.size == 0:
        raise DimensionError(f"{name}: dimension must be positive")
    if dim is not None and v.size != dim:
        raise DimensionError(f"{name}: expected dimension {dim}, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name}: entries must be finite")
    v.flags.writeable = False
    return v


def _check_same_dims(a, b):
    if a.x.size != b.x.size or a.y.size != b.y.size:
        raise DimensionError(
            f"block dimensions differ: ({a.x.size}, {a.y.size}) vs ({b.x.size}, {b.y.size})"
        )


@dataclass(frozen=True)
class BlockPair:
    """A point ``z = (x, y)`` of the product space with the l2 product norm."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", as_vec(self.x, name="x"))
        object.__setattr__(self, "y", as_vec(self.y, name="y"))

    @property
    def dims(self):
        return self.x.size, self.y.size

    def __add__(self, other):
        _check_same_dims(self, other)
        return BlockPair(self.x + other.x, self.y + other.y)

    def __sub__(self, other):
        _check_same_dims(self, other)
        return BlockPair(self.x - other.x, self.y - other.y)

    def __mul__(self, s):
        s = float(s)
        return BlockPair(s * self.x, s * self.y)

    __rmul__ = __mul__

    def __neg__(self):
        return BlockPair(-self.x, -self.y)

    def norm(self):
        return block_norm(self)

    def concat(self):
        return np.concatenate([self.x, self.y])

    @classmethod
    def split(cls, z, n):
        z = np.asarray(z, dtype=np.float64)
        return cls(z[:n], z[n:])


def block_norm(z):
    """``sqrt(||x||^2 + ||y||^2)``, the Hilbert norm on the product space.

    This is deliberately not ``max(||x||, ||y||)``, the default norm of a
    bare cartesian product.
    """
    return float(np.hypot(np.linalg.norm(z.x), np.linalg.norm(z.y)))


class LinOp:
    """Dense row-major linear operator ``R^cols -> R^rows``.

    The coefficient array is copied and frozen on construction.
    """

    def __init__(self, matrix):
        M = np.array(matrix, dtype=np.float64, copy=True)
        if M.ndim != 2 or M.shape[0] == 0 or M.shape[1] == 0:
            raise DimensionError(f"LinOp: expected a non-empty 2-D matrix, got shape {M.shape}")
        if not np.all(np.isfinite(M)):
            raise ValueError("LinOp: coefficients must be finite")
        M.flags.writeable = False
        self._M = M

    @classmethod
    def identity(cls, n, scale=1.0):
        return cls(scale * np.eye(n))

    @classmethod
    def from_rows(cls, rows, cols, data):
        data = np.asarray(data, dtype=np.float64)
        if data.size != rows * cols:
            raise DimensionError(f"LinOp: {rows}x{cols} needs {rows * cols} entries, got {data.size}")
        return cls(data.reshape(rows, cols))

    @property
    def matrix(self):
        return self._M

    @property
    def rows(self):
        return self._M.shape[0]

    @property
    def cols(self):
        return self._M.shape[1]

    @property
    def shape(self):
        return self._M.shape

    def apply(self, v):
        v = np.asarray(v, dtype=np.float64)
        if v.ndim != 1 or v.size != self.cols:
            raise DimensionError(f"LinOp.apply: expected dimension {self.cols}, got {v.shape}")
        return self._M @ v

    def adjoint_apply(self, w):
        w = np.asarray(w, dtype=np.float64)
        if w.ndim != 1 or w.size != self.rows:
            raise DimensionError(f"LinOp.adjoint_apply: expected dimension {self.rows}, got {w.shape}")
        return self._M.T @ w

    def gram(self):
        return self._M.T @ self._M

    def frobenius(self):
        return float(np.linalg.norm(self._M))

    def __repr__(self):
        return f"LinOp({self.rows}x{self.cols})"


def make_rng(seed):
    """Counter-based generator (Philox); identical seeds give identical streams.

    Independent child streams come from ``rng.spawn(k)``.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    seed = int(seed)
    if seed < 0 or seed >= 2**64:
        raise ParameterError("seed", "must be an unsigned 64-bit integer")
    return np.random.Generator(np.random.Philox(seed))


def op_norm_estimate(A, iters, rng):
    """Largest singular value of `A` by power iteration on ``A^T A``.

    The returned value is a running maximum of ``||A v_k||`` over unit
    iterates, so it is nondecreasing in `iters` and never exceeds the
    Frobenius norm.
    """
    if iters < 1:
        raise ParameterError("iters", "must be >= 1")
    M = A.matrix if isinstance(A, LinOp) else np.asarray(A, dtype=np.float64)
    if not np.any(M):
        return 0.0
    rng = make_rng(rng)
    v = rng.standard_normal(M.shape[1])
    v /= np.linalg.norm(v)
    best = 0.0
    for _ in range(iters):
        Av = M @ v
        best = max(best, float(np.linalg.norm(Av)))
        w = M.T @ Av
        nw = np.linalg.norm(w)
        if nw == 0.0:
            break
        v = w / nw
    best = max(best, float(np.linalg.norm(M @ v)))
    return min(best, float(np.linalg.norm(M)))


def smallest_singular_value(A):
    """Smallest singular value of ``A`` restricted to its column space dimension."""
    M = A.matrix if isinstance(A, LinOp) else np.asarray(A, dtype=np.float64)
    s = np.linalg.svd(M, compute_uv=False)
    if M.shape[0] < M.shape[1]:
        # wide matrix: A^T A is singular
        return 0.0
    return float(s[-1])


def _uniform(rng, *shape):
    return rng.uniform(-1.0, 1.0, size=shape)


def _sparse_vector(rng, n, k):
    x = np.zeros(n)
    support = rng.choice(n, size=min(k, n), replace=False)
    x[support] = _uniform(rng, support.size)
    return x


INSTANCE_KINDS = ("lasso", "lasso-bcd", "feasible-admm", "basis-pursuit")


def random_instance(kind, dims, rng):
    """Draw a deterministic random problem instance.

    Parameters
    ----------
    kind : str
        One of :data:`INSTANCE_KINDS`.
    dims : tuple of int
        ``(n, m, p)``. Unused entries are ignored but must be positive.
    rng : int or numpy.random.Generator

    Returns
    -------
    dict
        ``lasso``: ``A`` (p x n), ``c``, ``lam``.
        ``lasso-bcd``: ``A`` (p x n), ``B`` (p x m), ``c``, ``lam``.
        ``feasible-admm``: ``A1`` (p x n), ``A2`` (p x m), ``b``, and the
        feasible point ``x1``, ``x2``.
        ``basis-pursuit``: ``A`` (p x n), sparse ``x_true``, ``c = A x_true``.
        All matrices have entries in [-1, 1].
    """
    n, m, p = (int(d) for d in dims)
    if min(n, m, p) <= 0:
        raise ParameterError("dims", "all dimensions must be positive")
    rng = make_rng(rng)
    if kind == "lasso":
        A = _uniform(rng, p, n)
        x_true = _sparse_vector(rng, n, max(1, n // 5))
        c = A @ x_true + 0.01 * _uniform(rng, p)
        lam = 0.1 * float(np.max(np.abs(A.T @ c)))
        return {"A": A, "c": c, "lam": lam}
    if kind == "lasso-bcd":
        A = _uniform(rng, p, n)
        B = _uniform(rng, p, m)
        xt = _sparse_vector(rng, n, max(1, n // 5))
        yt = _sparse_vector(rng, m, max(1, m // 5))
        c = A @ xt + B @ yt + 0.01 * _uniform(rng, p)
        lam = 0.1 * float(np.max(np.abs(np.concatenate([A.T @ c, B.T @ c]))))
        return {"A": A, "B": B, "c": c, "lam": lam}
    if kind == "feasible-admm":
        A1 = _uniform(rng, p, n)
        A2 = _uniform(rng, p, m)
        x1 = _uniform(rng, n)
        x2 = _uniform(rng, m)
        b = A1 @ x1 + A2 @ x2
        return {"A1": A1, "A2": A2, "b": b, "x1": x1, "x2": x2}
    if kind == "basis-pursuit":
        A = _uniform(rng, p, n)
        x_true = _sparse_vector(rng, n, max(1, p // 5))
        c = A @ x_true
        return {"A": A, "x_true": x_true, "c": c}
    raise ParameterError("kind", f"unsupported instance kind {kind!r}; expected one of {INSTANCE_KINDS}")
