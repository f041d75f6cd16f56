"""Proximal maps, projections and small exact block solvers.

Everything here is a pure function of its inputs.  The projected-gradient
solver at the bottom is a slow reference used to certify the closed forms;
the iteration engine never calls it.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import (InvalidArgument, NoConvergence, SingularWeight,
                     UnsupportedCombination)

__all__ = ["ConstraintSet", "shrink", "project_box", "solve_quadratic_block",
           "solve_box_qp_exact", "inner_solve_oracle"]


def shrink(r, threshold):
    """Soft-thresholding ``sign(r) * max(0, |r| - threshold)``.

    This is the minimizer of ``||u||_1 + (mu/2)||u - r||^2`` for
    ``threshold = 1/mu``.  Entries with ``|r| == threshold`` map to exactly 0.

    Parameters
    ----------
    r : array_like or float
    threshold : float or array_like
        Nonnegative; broadcast against `r`.
    """
    threshold = np.asarray(threshold, dtype=float)
    if np.any(threshold < 0):
        raise InvalidArgument("shrink threshold must be nonnegative")
    r = np.asarray(r, dtype=float)
    out = np.sign(r) * np.maximum(np.abs(r) - threshold, 0.0)
    # exact zero at ties, and no -0.0 from sign(negative) * 0
    out = np.where(np.abs(r) <= threshold, 0.0, out)
    return out if out.ndim else float(out)


def project_box(u, lo, hi):
    """Componentwise ``median(lo, u, hi)``."""
    u = np.asarray(u, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        raise InvalidArgument("box projection needs lo <= hi componentwise")
    out = np.minimum(np.maximum(u, lo), hi)
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """A simple closed convex set: all of R^n, a box, or the nonnegative orthant.

    Use the ``all_space``, ``box`` and ``nonnegative`` constructors rather
    than the raw initializer.
    """

    kind: str
    size: int
    lo: np.ndarray
    hi: np.ndarray

    KINDS = ("all", "box", "nonneg")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise InvalidArgument(f"unknown constraint set kind {self.kind!r}")
        if self.lo.shape != (self.size,) or self.hi.shape != (self.size,):
            raise InvalidArgument("bounds must match the set dimension")
        if np.any(self.lo > self.hi):
            raise InvalidArgument("empty box: lo > hi in some component")
        self.lo.setflags(write=False)
        self.hi.setflags(write=False)

    @classmethod
    def all_space(cls, n):
        return cls("all", int(n), np.full(n, -np.inf), np.full(n, np.inf))

    @classmethod
    def nonnegative(cls, n):
        return cls("nonneg", int(n), np.zeros(n), np.full(n, np.inf))

    @classmethod
    def box(cls, lo, hi, n=None):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if n is None:
            n = max(lo.size, hi.size)
        lo = np.broadcast_to(lo, (n,)).copy()
        hi = np.broadcast_to(hi, (n,)).copy()
        return cls("box", int(n), lo, hi)

    @property
    def is_all_space(self):
        return self.kind == "all"

    def project(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "all":
            return u.copy()
        return np.minimum(np.maximum(u, self.lo), self.hi)

    def contains(self, u, tol=0.0):
        u = np.asarray(u, dtype=float)
        return bool(np.all(u >= self.lo - tol) and np.all(u <= self.hi + tol))

    def __repr__(self):
        if self.kind == "box":
            return f"ConstraintSet.box(lo={self.lo.tolist()}, hi={self.hi.tolist()})"
        return f"ConstraintSet.{'all_space' if self.kind == 'all' else 'nonnegative'}({self.size})"


def _is_diagonal(weight):
    return weight.ndim == 1


def _as_weight(weight, n):
    weight = np.asarray(weight, dtype=float)
    if weight.ndim == 0:
        weight = np.full(n, float(weight))
    if weight.ndim == 1 and weight.shape != (n,):
        raise InvalidArgument("diagonal weight has the wrong length")
    if weight.ndim == 2 and weight.shape != (n, n):
        raise InvalidArgument("weight matrix has the wrong shape")
    return weight


def solve_quadratic_block(linear, weight, cset=None):
    """Minimize ``<linear, u> + 0.5 u'Wu`` over a simple set.

    Parameters
    ----------
    linear : array_like, shape (k,)
    weight : float, array of shape (k,) or (k, k)
        A 1-d array is read as a positive diagonal.
    cset : ConstraintSet, optional
        Defaults to all of R^k.

    Returns
    -------
    ndarray
        For all-space: ``-W^{-1} linear``.  For boxes and orthants the weight
        must be diagonal and the unconstrained minimizer is clamped.

    Raises
    ------
    UnsupportedCombination
        Full (non-diagonal) weight together with a box or orthant.
    SingularWeight
        Weight not positive definite.
    """
    linear = np.atleast_1d(np.asarray(linear, dtype=float))
    k = linear.size
    weight = _as_weight(weight, k)
    if cset is None:
        cset = ConstraintSet.all_space(k)
    if _is_diagonal(weight):
        if np.any(weight <= 0):
            raise SingularWeight("diagonal weight must be strictly positive")
        return cset.project(-linear / weight)
    if not cset.is_all_space:
        raise UnsupportedCombination(
            "closed form over a box needs a diagonal weight; "
            "use solve_box_qp_exact for small dense blocks")
    try:
        chol = np.linalg.cholesky(weight)
    except np.linalg.LinAlgError as exc:
        raise SingularWeight("weight matrix is not positive definite") from exc
    y = np.linalg.solve(chol, -linear)
    return np.linalg.solve(chol.T, y)


def solve_box_qp_exact(linear, weight, cset, max_size=10):
    """Exact minimizer of ``<linear, u> + 0.5 u'Wu`` over a box, W full PD.

    Enumerates the 3^k (free / at lower / at upper) patterns and keeps the
    one satisfying the KKT sign conditions.  Only for tiny blocks.
    """
    linear = np.atleast_1d(np.asarray(linear, dtype=float))
    k = linear.size
    weight = _as_weight(weight, k)
    if weight.ndim == 1:
        return solve_quadratic_block(linear, weight, cset)
    if cset.is_all_space:
        return solve_quadratic_block(linear, weight, cset)
    if k > max_size:
        raise UnsupportedCombination(f"box QP enumeration limited to {max_size} variables")
    if np.linalg.eigvalsh(weight)[0] <= 0:
        raise SingularWeight("weight matrix is not positive definite")
    lo, hi = cset.lo, cset.hi
    options = [[0] + ([-1] if np.isfinite(lo[j]) else []) + ([1] if np.isfinite(hi[j]) else [])
               for j in range(k)]
    best, best_val = None, np.inf
    scale = 1.0 + np.abs(linear).max() + np.abs(weight).max()
    for pattern in itertools.product(*options):
        pattern = np.array(pattern)
        free = pattern == 0
        u = np.where(pattern < 0, lo, np.where(pattern > 0, hi, 0.0))
        if free.any():
            rhs = -linear[free] - weight[np.ix_(free, ~free)] @ u[~free]
            u[free] = np.linalg.solve(weight[np.ix_(free, free)], rhs)
            tol = 1e-12 * scale * (1.0 + np.abs(u[free]).max())
            if np.any(u[free] < lo[free] - tol) or np.any(u[free] > hi[free] + tol):
                continue
        grad = linear + weight @ u
        tol = 1e-10 * scale
        if np.any(grad[pattern < 0] < -tol) or np.any(grad[pattern > 0] > tol):
            continue
        u = cset.project(u)
        val = linear @ u + 0.5 * u @ weight @ u
        if val < best_val:
            best, best_val = u, val
    if best is None:
        raise NoConvergence("no KKT pattern found for box QP")
    return best


def inner_solve_oracle(objective, cset, start, tol=1e-10, lipschitz=None,
                       max_iter=10**6):
    """Projected-gradient reference minimizer.

    Slow and simple on purpose: it only certifies closed-form updates in
    the tests.  Nonsmooth l1 terms have to be rewritten first (for example
    by splitting ``u = u_plus - u_minus`` over the orthant).

    Parameters
    ----------
    objective : callable
        ``objective(u) -> (value, gradient)`` of a convex smooth function.
    cset : ConstraintSet
    start : array_like
    tol : float
        Stop once ``||u - P(u - grad)|| <= tol``.
    lipschitz : float, optional
        Gradient Lipschitz bound used for the initial step ``1/L``.
    max_iter : int

    Raises
    ------
    NoConvergence
        After `max_iter` steps.
    """
    if tol <= 0:
        raise InvalidArgument("tol must be positive")
    u = cset.project(np.atleast_1d(np.asarray(start, dtype=float)))
    step = 1.0 / lipschitz if lipschitz else 1.0
    val, grad = objective(u)
    for _ in range(max_iter):
        if np.linalg.norm(u - cset.project(u - grad)) <= tol:
            return u
        while True:
            cand = cset.project(u - step * grad)
            cval, cgrad = objective(cand)
            d = cand - u
            dd = d @ d
            # the curvature test is immune to cancellation in the objective value,
            # which otherwise collapses the step near the optimum
            if (cval <= val + grad @ d + dd / (2 * step)
                    or (cgrad - grad) @ d <= dd / step):
                break
            step *= 0.5
            if step < 1e-300:
                raise NoConvergence("backtracking step underflow")
        u, val, grad = cand, cval, cgrad
    raise NoConvergence(f"projected gradient did not reach tol={tol} in {max_iter} steps")
