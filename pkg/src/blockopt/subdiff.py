"""Subdifferentials of ``atom + smooth`` sums and sampled verifiers.

For the convex atoms supported here the Frechet, limiting and convex
subdifferentials coincide, so the set at a point is a product of closed
intervals. The sum rule ``d(atom + smooth)(x) = d atom(x) + grad smooth(x)``
is used as the definition for every set query.

Only distances and membership are exposed; sets are never returned to
callers except as :class:`SubdiffInterval`.
"""

from dataclasses import dataclass

import numpy as np

from .core import BlockPair, as_vec, make_rng
from .errors import DimensionError, ParameterError, PreconditionError, UnsupportedError
from .prox import INFINITE, Atom, Zero, is_infinite

__all__ = [
    "StructuredFn",
    "SubdiffInterval",
    "subdiff_interval",
    "subdiff_distance",
    "subdiff_distance_via_atom",
    "distance_to_subdiff",
    "membership",
    "frechet_empirical_check",
    "closed_graph_spotcheck",
    "grad_fd_check",
    "block_subdiff_distances",
    "critical_point_check",
]


@dataclass(frozen=True)
class SubdiffInterval:
    """Per-coordinate closed intervals ``[lo_i, hi_i]`` (bounds may be infinite)."""

    lo: np.ndarray
    hi: np.ndarray

    def distance(self, p):
        p = np.asarray(p, dtype=float)
        if p.shape != self.lo.shape:
            raise DimensionError(f"interval has dimension {self.lo.size}, point has {p.size}")
        return float(np.linalg.norm(p - np.clip(p, self.lo, self.hi)))

    def contains(self, p, tol=0.0):
        return self.distance(p) <= tol


@dataclass(frozen=True)
class StructuredFn:
    """``atom(x) + smooth(x)`` with `smooth` optional."""

    atom: Atom
    smooth: object = None

    def __post_init__(self):
        if not isinstance(self.atom, Atom):
            raise UnsupportedError(f"unsupported nonsmooth part {type(self.atom).__name__}")
        if not self.atom.separable:
            raise UnsupportedError(f"atom {self.atom.tag!r} is not separable")

    def value(self, x):
        v = self.atom.value(x)
        if is_infinite(v):
            return INFINITE
        if self.smooth is not None:
            v += self.smooth.value(x)
        return v

    def smooth_grad(self, x):
        if self.smooth is None:
            return np.zeros(np.shape(x))
        return self.smooth.grad(x)

    def subdiff_distance(self, x):
        return subdiff_distance(self, x)


def _atom_interval(F, x):
    bounds = F.atom.subdiff_bounds(x)
    if bounds is None:
        return None
    return SubdiffInterval(np.asarray(bounds[0], float), np.asarray(bounds[1], float))


def subdiff_interval(F, x):
    """``dF(x)`` as intervals, or None when `x` is outside the domain."""
    x = as_vec(x, name="x")
    I = _atom_interval(F, x)
    if I is None:
        return None
    g = F.smooth_grad(x)
    return SubdiffInterval(I.lo + g, I.hi + g)


def subdiff_distance(F, x):
    """``dist(0, dF(x))``; :data:`INFINITE` when `x` is infeasible."""
    I = subdiff_interval(F, x)
    if I is None:
        return INFINITE
    # distance from 0 to [lo, hi] is max(lo, -hi, 0) per coordinate
    per = np.maximum(np.maximum(I.lo, -I.hi), 0.0)
    return float(np.linalg.norm(per))


def subdiff_distance_via_atom(F, x):
    """Same quantity as :func:`subdiff_distance`, computed as
    ``dist(-grad smooth(x), d atom(x))`` by clamping.

    Kept as a separate code path so the two can be compared.
    """
    x = as_vec(x, name="x")
    I = _atom_interval(F, x)
    if I is None:
        return INFINITE
    return I.distance(-F.smooth_grad(x))


def distance_to_subdiff(F, x, u):
    """``dist(u, dF(x))``; :data:`INFINITE` when `x` is infeasible."""
    x = as_vec(x, name="x")
    u = as_vec(u, dim=x.size, name="u")
    I = _atom_interval(F, x)
    if I is None:
        return INFINITE
    return I.distance(u - F.smooth_grad(x))


def membership(F, x, u, tol):
    """True iff ``dist(u, dF(x)) <= tol``."""
    d = distance_to_subdiff(F, x, u)
    return (not is_infinite(d)) and d <= tol


def frechet_empirical_check(F, x, u, eps=1e-6, n_samples=64, radius_min=1e-6, rng=0, n_radii=16):
    """Sampled falsifier for Frechet membership ``u in dF(x)``.

    Tests ``F(y) - F(x) - <u, y - x> >= -eps*||y - x||`` on ``y = x + r*d``
    for `n_samples` random unit directions and `n_radii` radii log-spaced
    in ``[radius_min, 1]``. A False result refutes membership; a True
    result is only evidence.
    """
    if not radius_min > 0:
        raise ParameterError("radius_min", "must be positive")
    x = as_vec(x, name="x")
    u = as_vec(u, dim=x.size, name="u")
    fx = F.value(x)
    if is_infinite(fx):
        return False
    rng = make_rng(rng)
    radii = np.logspace(np.log10(radius_min), 0.0, n_radii)
    for _ in range(n_samples):
        d = rng.standard_normal(x.size)
        d /= np.linalg.norm(d)
        for r in radii:
            y = x + r * d
            fy = F.value(y)
            if is_infinite(fy):
                continue
            step = y - x
            if fy - fx - float(np.dot(u, step)) < -eps * float(np.linalg.norm(step)):
                return False
    return True


def closed_graph_spotcheck(F, xs, us, x_lim, u_lim, tol):
    """Check one convergent sequence against the closed-graph property.

    Every ``(xs[k], us[k])`` must be a member pair at `tol` (raises
    PreconditionError otherwise). Passes iff the limit pair is a member at
    ``10*tol`` and ``|F(xs[k]) - F(x_lim)|`` shrinks along the sequence:
    the largest gap over the second half is at most half the largest gap
    over the first half, or all gaps are within ``10*tol``.

    This inspects a single sequence, not the closure of the whole graph.
    """
    if len(xs) != len(us):
        raise DimensionError(f"sequences have unequal lengths {len(xs)} and {len(us)}")
    if len(xs) == 0:
        raise PreconditionError("sequences must be non-empty")
    for k, (xk, uk) in enumerate(zip(xs, us)):
        if not membership(F, xk, uk, tol):
            d = distance_to_subdiff(F, xk, uk)
            raise PreconditionError(f"pair {k} is not a member: dist(u, dF(x)) = {d} > tol = {tol}")
    if not membership(F, x_lim, u_lim, 10 * tol):
        return False
    f_lim = F.value(x_lim)
    if is_infinite(f_lim):
        return False
    gaps = []
    for xk in xs:
        fk = F.value(xk)
        if is_infinite(fk):
            return False
        gaps.append(abs(fk - f_lim))
    gaps = np.asarray(gaps)
    if np.all(gaps <= 10 * tol):
        return True
    half = max(1, len(gaps) // 2)
    head, tail = gaps[:half], gaps[half:]
    if tail.size == 0:
        return bool(gaps[-1] <= 10 * tol)
    return bool(tail.max() <= 0.5 * head.max())


def grad_fd_check(F, x, h=1e-5, zero_grad_tol=1e-8):
    """Compare the analytic gradient of a smooth `F` with central differences.

    Returns the max-coordinate error relative to ``||grad||_inf``, or the
    absolute max-coordinate error when ``||grad||_inf <= zero_grad_tol``.
    """
    if not isinstance(F.atom, Zero):
        raise UnsupportedError("grad_fd_check needs a smooth function (Zero atom)")
    if not h > 0:
        raise ParameterError("h", "must be positive")
    x = as_vec(x, name="x")
    g = F.smooth_grad(x)
    fd = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        fd[i] = (F.value(xp) - F.value(xm)) / (2 * h)
    err = float(np.max(np.abs(fd - g)))
    scale = float(np.max(np.abs(g)))
    return err if scale <= zero_grad_tol else err / scale


def block_subdiff_distances(psi, z):
    """Blockwise ``(dist(0, d_x psi(z)), dist(0, d_y psi(z)))``.

    `psi` must expose atoms ``f``, ``g`` and a coupling ``H`` so that
    ``psi(x, y) = f(x) + g(y) + H(x, y)``.
    """
    if not isinstance(z, BlockPair):
        raise TypeError("z must be a BlockPair")
    Fx = StructuredFn(psi.f, psi.H.partial_x(z.y))
    Fy = StructuredFn(psi.g, psi.H.partial_y(z.x))
    return subdiff_distance(Fx, z.x), subdiff_distance(Fy, z.y)


def critical_point_check(psi, z, tol):
    """True iff ``dist(0, d_x psi) + dist(0, d_y psi) <= tol`` at `z`."""
    dx, dy = block_subdiff_distances(psi, z)
    if is_infinite(dx) or is_infinite(dy):
        return False
    return dx + dy <= tol
