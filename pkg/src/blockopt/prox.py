"""Closed-form proximal operators for a small library of convex atoms.

Every atom is proper, lower semicontinuous and convex, so the scaled
prox ``argmin_u t*a(u) + 0.5*||u - x||^2`` is a single point. Nonconvex
atoms (l0, rank) are intentionally absent.

Indicator atoms never return ``inf`` from :meth:`Atom.value`; an
infeasible point yields the :data:`INFINITE` marker instead, and callers
test for it with :func:`is_infinite`.
"""

from dataclasses import dataclass, field

import numpy as np

from .core import as_vec, make_rng
from .errors import DimensionError, ParameterError, UnsupportedError

__all__ = [
    "INFINITE",
    "is_infinite",
    "Atom",
    "Zero",
    "L1",
    "SqL2",
    "IndNonneg",
    "IndBox",
    "atom_from_dict",
    "ProxResult",
    "prox",
    "prox_oracle_1d",
    "default_oracle_window",
    "prox_objective_optimality",
]


class _Infinite:
    """Singleton marking ``+inf`` function values (points outside a domain)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFINITE"

    def __reduce__(self):
        return (_Infinite, ())


INFINITE = _Infinite()


def is_infinite(v):
    return v is INFINITE


class Atom:
    """Base class; subclasses are frozen dataclasses."""

    tag = None
    separable = True
    is_indicator = False

    def value(self, x):
        raise NotImplementedError

    def _prox(self, t, x):
        raise NotImplementedError

    def subdiff_bounds(self, x):
        """Per-coordinate ``(lo, hi)`` of the convex subdifferential at `x`.

        Returns ``None`` when `x` is outside the domain. Bounds may be
        infinite (normal cones of indicator atoms).
        """
        raise NotImplementedError

    def contains(self, x):
        return True

    def project(self, x):
        """Nearest domain point; the identity for finite-valued atoms."""
        return np.asarray(x, dtype=np.float64)

    @property
    def strictly_convex(self):
        return False

    @property
    def lower_bound(self):
        return 0.0

    def scalar_fn(self):
        """Vectorised 1-D version of the atom with ``inf`` outside the domain.

        Only used to feed the brute-force grid oracle.
        """
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError


def _check_weight(lam, name="lambda"):
    lam = float(lam)
    if not np.isfinite(lam) or lam < 0:
        raise ParameterError(name, "must be a finite nonnegative number")
    return lam


@dataclass(frozen=True)
class Zero(Atom):
    tag = "zero"

    def value(self, x):
        return 0.0

    def _prox(self, t, x):
        return x.copy()

    def subdiff_bounds(self, x):
        z = np.zeros(np.shape(x))
        return z, z.copy()

    def scalar_fn(self):
        return lambda u: np.zeros_like(np.asarray(u, dtype=float))

    def to_dict(self):
        return {"tag": self.tag}


@dataclass(frozen=True)
class L1(Atom):
    """``lam * ||x||_1``."""

    lam: float = 1.0
    tag = "l1"

    def __post_init__(self):
        object.__setattr__(self, "lam", _check_weight(self.lam))

    def value(self, x):
        return self.lam * float(np.sum(np.abs(x)))

    def _prox(self, t, x):
        s = t * self.lam
        return np.sign(x) * np.maximum(np.abs(x) - s, 0.0)

    def subdiff_bounds(self, x):
        x = np.asarray(x)
        lo = np.where(x > 0, self.lam, -self.lam)
        hi = np.where(x < 0, -self.lam, self.lam)
        return lo.astype(float), hi.astype(float)

    def scalar_fn(self):
        lam = self.lam
        return lambda u: lam * np.abs(u)

    def to_dict(self):
        return {"tag": self.tag, "lambda": self.lam}


@dataclass(frozen=True)
class SqL2(Atom):
    """``lam * ||x||^2`` (no factor one half); prox is ``x / (1 + 2 t lam)``."""

    lam: float = 1.0
    tag = "sql2"

    def __post_init__(self):
        object.__setattr__(self, "lam", _check_weight(self.lam))

    def value(self, x):
        return self.lam * float(np.dot(x, x))

    def _prox(self, t, x):
        return x / (1.0 + 2.0 * t * self.lam)

    def subdiff_bounds(self, x):
        g = 2.0 * self.lam * np.asarray(x, dtype=float)
        return g, g.copy()

    @property
    def strictly_convex(self):
        return self.lam > 0

    def scalar_fn(self):
        lam = self.lam
        return lambda u: lam * np.asarray(u, dtype=float) ** 2

    def to_dict(self):
        return {"tag": self.tag, "lambda": self.lam}


@dataclass(frozen=True)
class IndNonneg(Atom):
    """Indicator of the nonnegative orthant."""

    tag = "nonneg"
    is_indicator = True

    def contains(self, x):
        return bool(np.all(np.asarray(x) >= 0))

    def value(self, x):
        return 0.0 if self.contains(x) else INFINITE

    def _prox(self, t, x):
        return np.maximum(x, 0.0)

    def project(self, x):
        return np.maximum(np.asarray(x, dtype=float), 0.0)

    def subdiff_bounds(self, x):
        x = np.asarray(x, dtype=float)
        if not self.contains(x):
            return None
        lo = np.where(x == 0, -np.inf, 0.0)
        return lo, np.zeros_like(x)

    def scalar_fn(self):
        return lambda u: np.where(np.asarray(u) >= 0, 0.0, np.inf)

    def to_dict(self):
        return {"tag": self.tag}


@dataclass(frozen=True)
class IndBox(Atom):
    """Indicator of the box ``lo <= x <= hi`` (componentwise)."""

    lo: np.ndarray = field(default=None)
    hi: np.ndarray = field(default=None)
    tag = "box"
    is_indicator = True

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionError("box: lo and hi must be vectors of equal length")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise ParameterError("box", "bounds must not be NaN")
        if np.any(lo > hi):
            i = int(np.argmax(lo > hi))
            raise ParameterError("box", f"lo[{i}] = {lo[i]} exceeds hi[{i}] = {hi[i]}")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __eq__(self, other):
        return (
            isinstance(other, IndBox)
            and np.array_equal(self.lo, other.lo)
            and np.array_equal(self.hi, other.hi)
        )

    __hash__ = None

    def _bounds_for(self, x):
        x = np.asarray(x)
        if self.lo.size == 1:
            return np.full(x.shape, self.lo[0]), np.full(x.shape, self.hi[0])
        if self.lo.size != x.size:
            raise DimensionError(f"box: bounds have dimension {self.lo.size}, point has {x.size}")
        return self.lo, self.hi

    def contains(self, x):
        lo, hi = self._bounds_for(x)
        return bool(np.all((x >= lo) & (x <= hi)))

    def value(self, x):
        return 0.0 if self.contains(x) else INFINITE

    def _prox(self, t, x):
        lo, hi = self._bounds_for(x)
        return np.clip(x, lo, hi)

    def project(self, x):
        return self._prox(1.0, np.asarray(x, dtype=float))

    def subdiff_bounds(self, x):
        x = np.asarray(x, dtype=float)
        if not self.contains(x):
            return None
        lo, hi = self._bounds_for(x)
        slo = np.where(x == lo, -np.inf, 0.0)
        shi = np.where(x == hi, np.inf, 0.0)
        return slo, shi

    def scalar_fn(self):
        if self.lo.size != 1:
            raise UnsupportedError("box: scalar form needs scalar bounds")
        a, b = float(self.lo[0]), float(self.hi[0])
        return lambda u: np.where((np.asarray(u) >= a) & (np.asarray(u) <= b), 0.0, np.inf)

    def to_dict(self):
        return {"tag": self.tag, "lo": self.lo.tolist(), "hi": self.hi.tolist()}


_TAGS = {"zero": Zero, "l1": L1, "sql2": SqL2, "nonneg": IndNonneg, "box": IndBox}


def atom_from_dict(d):
    """Inverse of ``Atom.to_dict``; raises ParameterError on unknown tags."""
    if not isinstance(d, dict) or "tag" not in d:
        raise ParameterError("atom", "must be an object with a 'tag' field")
    tag = str(d["tag"]).lower()
    if tag not in _TAGS:
        raise ParameterError("atom.tag", f"unknown atom {tag!r}; expected one of {sorted(_TAGS)}")
    if tag in ("l1", "sql2"):
        return _TAGS[tag](d.get("lambda", 1.0))
    if tag == "box":
        if "lo" not in d or "hi" not in d:
            raise ParameterError("atom.box", "needs 'lo' and 'hi'")
        return IndBox(d["lo"], d["hi"])
    return _TAGS[tag]()


@dataclass(frozen=True)
class ProxResult:
    point: np.ndarray
    objective: float


def _scaled_objective(a, t, x, u):
    v = a.value(u)
    if is_infinite(v):
        return np.inf
    d = u - x
    return t * v + 0.5 * float(np.dot(d, d))


def prox(a, t, x):
    """Scaled proximal point ``argmin_u t*a(u) + 0.5*||u - x||^2``.

    Parameters
    ----------
    a : Atom
    t : float
        Positive scaling of the atom.
    x : array_like

    Returns
    -------
    ProxResult
        The minimizer and the objective value attained there.
    """
    t = float(t)
    if not (t > 0 and np.isfinite(t)):
        raise ParameterError("t", "must be a positive finite number")
    x = as_vec(x, name="x")
    u = a._prox(t, x)
    return ProxResult(u, _scaled_objective(a, t, x, u))


def default_oracle_window(x):
    r = 10.0 * (1.0 + abs(x))
    return x - r, x + r


def prox_oracle_1d(f, x, lo=None, hi=None, step=1e-5):
    """Brute-force grid minimizer of ``f(u) + 0.5*(u - x)^2`` over ``[lo, hi]``.

    Ties are broken toward the smallest grid point. `f` may return
    ``inf`` outside its domain; it is called on the whole grid at once
    when it accepts arrays, and elementwise otherwise.
    """
    x = float(x)
    if lo is None or hi is None:
        dlo, dhi = default_oracle_window(x)
        lo = dlo if lo is None else lo
        hi = dhi if hi is None else hi
    lo, hi, step = float(lo), float(hi), float(step)
    if not lo < hi:
        raise ParameterError("lo", "must be smaller than hi")
    if not (step > 0 and step <= (hi - lo) / 10):
        raise ParameterError("step", "must lie in (0, (hi - lo)/10]")
    count = int(np.floor((hi - lo) / step)) + 1
    grid = lo + step * np.arange(count)
    try:
        fv = np.asarray(f(grid), dtype=float)
        if fv.shape != grid.shape:
            raise ValueError
    except (TypeError, ValueError):
        fv = np.array([f(float(u)) for u in grid], dtype=float)
    obj = fv + 0.5 * (grid - x) ** 2
    obj[np.isnan(obj)] = np.inf
    if not np.any(np.isfinite(obj)):
        raise ValueError("prox_oracle_1d: objective is not finite anywhere on the grid")
    return float(grid[int(np.argmin(obj))])


def prox_objective_optimality(a, t, x, u, n_samples=64, rng=0, slack=1e-10):
    """Sampled check that `u` minimizes ``t*a(.) + 0.5*||. - x||^2``.

    Perturbations ``v = u + r*d`` use random unit directions ``d`` and
    radii ``r`` log-spaced in ``[1e-4, 1]``. Returns False as soon as a
    sample beats `u` by more than `slack`.
    """
    x = np.asarray(x, dtype=float)
    u = as_vec(u, dim=x.size, name="u")
    rng = make_rng(rng)
    base = _scaled_objective(a, t, x, u)
    if not np.isfinite(base):
        return False
    radii = np.logspace(-4, 0, 16)
    for _ in range(n_samples):
        d = rng.standard_normal(x.size)
        d /= np.linalg.norm(d)
        for r in radii:
            if _scaled_objective(a, t, x, u + r * d) < base - slack:
                return False
    return True
