"""Block-structured convex programs.

A problem is::

    minimize    G(u_1, ..., u_N) + sum_i J_i(u_i)
    subject to  sum_i A_i u_i = b,   u_i in U_i

with a smooth coupler ``G``, separable nonsmooth terms ``J_i`` and simple
sets ``U_i``.  All objects are immutable after construction and their
oracles are pure, so they can be evaluated concurrently.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import (ContractViolation, InvalidArgument,
                     UnsupportedCombination)
from .prox import ConstraintSet, shrink, solve_box_qp_exact, solve_quadratic_block

__all__ = [
    "ConstraintSet", "ZeroTerm", "L1Term", "SmoothCoupler", "ZeroCoupler",
    "QuadraticCoupler", "FunctionCoupler", "BlockSpec", "BlockProblem",
    "SaddleReference", "eval_objective", "primal_residual", "spectral_norm_sq",
    "build_difference_matrix", "estimate_lipschitz", "as_matrix",
]

DENSE_LIMIT = 100


def as_matrix(M):
    """Store small matrices densely and large ones in CSR layout."""
    if sp.issparse(M):
        M = M.tocsr().astype(float)
        if M.shape[0] < DENSE_LIMIT and M.shape[1] < DENSE_LIMIT:
            return M.toarray()
        return M
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M.reshape(-1, 1)
    if M.ndim != 2:
        raise ContractViolation("matrix must be two-dimensional")
    if M.shape[0] >= DENSE_LIMIT or M.shape[1] >= DENSE_LIMIT:
        return sp.csr_matrix(M)
    return M


def _dense(M):
    return M.toarray() if sp.issparse(M) else np.asarray(M)


# -- nonsmooth terms ---------------------------------------------------------

class ZeroTerm:
    """``J_i = 0``."""

    separable = True

    def value(self, u):
        return 0.0

    def l1_weights(self, n):
        return np.zeros(n)

    def prox(self, linear, weight, cset):
        """argmin ``<linear,u> + 0.5 u'Wu`` over `cset`."""
        if np.ndim(weight) == 2:
            return solve_box_qp_exact(linear, weight, cset)
        return solve_quadratic_block(linear, weight, cset)

    def __repr__(self):
        return "ZeroTerm()"


class L1Term:
    """``J_i(u) = sum_j w_j |u_j|`` with nonnegative weights."""

    separable = True

    def __init__(self, weight=1.0):
        weight = np.asarray(weight, dtype=float)
        if np.any(weight < 0):
            raise InvalidArgument("l1 weight must be nonnegative")
        self.weight = weight

    def value(self, u):
        return float(np.sum(self.weight * np.abs(u)))

    def l1_weights(self, n):
        return np.broadcast_to(self.weight, (n,)).astype(float)

    def prox(self, linear, weight, cset):
        # separable 1-d convex pieces: clamping the free minimizer is exact
        linear = np.atleast_1d(np.asarray(linear, dtype=float))
        weight = np.asarray(weight, dtype=float)
        if weight.ndim == 0:
            weight = np.full(linear.size, float(weight))
        if weight.ndim == 2:
            raise UnsupportedCombination("l1 prox needs a diagonal quadratic weight")
        lam = self.l1_weights(linear.size)
        return cset.project(shrink(-linear / weight, lam / weight))

    def __repr__(self):
        return f"L1Term({self.weight!r})"


# -- smooth couplers -----------------------------------------------------------

class SmoothCoupler:
    """Smooth convex coupling term ``G`` with an ``L``-Lipschitz gradient.

    Subclasses implement :meth:`value` and :meth:`gradient`; ``lipschitz``
    must be a valid upper bound (it feeds the step-size safety check).
    """

    def __init__(self, n, lipschitz):
        if lipschitz is None or not np.isfinite(lipschitz) or lipschitz < 0:
            raise InvalidArgument("lipschitz bound B_G must be a finite nonnegative number")
        self.n = int(n)
        self.lipschitz = float(lipschitz)

    def value(self, u):
        raise NotImplementedError

    def gradient(self, u):
        raise NotImplementedError

    def hessian(self, u):
        return None


class ZeroCoupler(SmoothCoupler):
    def __init__(self, n):
        super().__init__(n, 0.0)

    def value(self, u):
        return 0.0

    def gradient(self, u):
        return np.zeros(self.n)

    def hessian(self, u):
        return np.zeros((self.n, self.n))


class QuadraticCoupler(SmoothCoupler):
    """``G(u) = 0.5 u'Qu + q'u + c`` with ``Q`` symmetric PSD."""

    def __init__(self, Q, q=None, c=0.0, lipschitz=None):
        Q = as_matrix(Q)
        n = Q.shape[0]
        if Q.shape != (n, n):
            raise ContractViolation("Q must be square")
        Qd = _dense(Q)
        if not np.allclose(Qd, Qd.T, atol=1e-12, rtol=0):
            raise InvalidArgument("Q must be symmetric")
        eigs = np.linalg.eigvalsh(Qd) if n <= 2000 else None
        if eigs is not None and eigs[0] < -1e-10 * max(1.0, abs(eigs[-1])):
            raise InvalidArgument("Q must be positive semidefinite")
        if lipschitz is None:
            if eigs is not None:
                lipschitz = max(float(eigs[-1]), 0.0)
            else:
                lipschitz = spectral_norm_sq(Q) ** 0.5
        super().__init__(n, lipschitz)
        self.Q = Q
        self.q = np.zeros(n) if q is None else np.asarray(q, dtype=float).reshape(n)
        self.c = float(c)

    def value(self, u):
        return float(0.5 * u @ (self.Q @ u) + self.q @ u + self.c)

    def gradient(self, u):
        return np.asarray(self.Q @ u).ravel() + self.q

    def hessian(self, u):
        return _dense(self.Q)


class FunctionCoupler(SmoothCoupler):
    """Wrap plain callables as a coupler."""

    def __init__(self, n, value, gradient, lipschitz, hessian=None):
        super().__init__(n, lipschitz)
        self._value = value
        self._gradient = gradient
        self._hessian = hessian

    def value(self, u):
        return float(self._value(u))

    def gradient(self, u):
        return np.asarray(self._gradient(u), dtype=float)

    def hessian(self, u):
        return None if self._hessian is None else self._hessian(u)


def estimate_lipschitz(coupler, n_dirs=20, seed=0, h=1e-4, point=None):
    """Rough lower estimate of ``B_G`` from finite-difference curvature.

    Debug aid only: the result is a lower bound on the true constant, so it
    is never substituted for a user-supplied ``lipschitz`` silently.
    """
    rng = np.random.default_rng(seed)
    n = coupler.n
    u = np.zeros(n) if point is None else np.asarray(point, dtype=float)
    best = 0.0
    for _ in range(n_dirs):
        d = rng.standard_normal(n)
        d /= np.linalg.norm(d)
        gp = coupler.gradient(u + h * d)
        gm = coupler.gradient(u - h * d)
        best = max(best, np.linalg.norm(gp - gm) / (2 * h))
    return best


# -- problem container -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BlockSpec:
    """One block: coupling matrix ``A_i`` (m x n_i), term ``J_i`` and set ``U_i``.

    ``solver`` optionally registers a callable
    ``solver(linear, weight, block) -> u_i`` used when no closed form applies.
    """

    A: object
    term: object = field(default_factory=ZeroTerm)
    cset: ConstraintSet = None
    solver: object = None

    def __post_init__(self):
        A = as_matrix(self.A)
        object.__setattr__(self, "A", A)
        if self.cset is None:
            object.__setattr__(self, "cset", ConstraintSet.all_space(A.shape[1]))
        if self.cset.size != A.shape[1]:
            raise ContractViolation("constraint set dimension differs from columns of A_i")

    @property
    def size(self):
        return self.A.shape[1]

    def solve(self, linear, weight):
        """argmin ``<linear,u> + 0.5 u'Wu + J_i(u)`` over ``U_i``."""
        if self.solver is not None:
            return np.asarray(self.solver(linear, weight, self), dtype=float)
        return self.term.prox(linear, weight, self.cset)


class BlockProblem:
    """N-block convex program with coupled linear equality constraints.

    Parameters
    ----------
    blocks : sequence of BlockSpec
    coupler : SmoothCoupler
        Acts on the stacked vector ``u = (u_1, ..., u_N)``.
    b : array_like, shape (m,)
    """

    def __init__(self, blocks, coupler, b):
        blocks = tuple(blocks)
        if not blocks:
            raise ContractViolation("need at least one block")
        b = np.atleast_1d(np.asarray(b, dtype=float)).copy()
        if not np.all(np.isfinite(b)):
            raise ContractViolation("right-hand side must be finite")
        m = b.size
        for i, blk in enumerate(blocks):
            if blk.A.shape[0] != m:
                raise ContractViolation(f"block {i}: A_i has {blk.A.shape[0]} rows, expected {m}")
        sizes = [blk.size for blk in blocks]
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        n = int(offsets[-1])
        if coupler.n != n:
            raise ContractViolation(f"coupler acts on {coupler.n} variables, blocks give {n}")
        b.setflags(write=False)
        self.blocks = blocks
        self.coupler = coupler
        self.b = b
        self.n = n
        self.m = m
        self.slices = tuple(slice(int(offsets[i]), int(offsets[i + 1])) for i in range(len(blocks)))
        if any(sp.issparse(blk.A) for blk in blocks) or n >= DENSE_LIMIT or m >= DENSE_LIMIT:
            A = sp.hstack([sp.csr_matrix(blk.A) for blk in blocks]).tocsr()
        else:
            A = np.hstack([blk.A for blk in blocks])
            A.setflags(write=False)
        self.A = A
        lo = np.concatenate([blk.cset.lo for blk in blocks])
        hi = np.concatenate([blk.cset.hi for blk in blocks])
        lo.setflags(write=False)
        hi.setflags(write=False)
        self.lower, self.upper = lo, hi

    @property
    def N(self):
        return len(self.blocks)

    def split(self, u):
        return [u[s] for s in self.slices]

    def project(self, u):
        return np.minimum(np.maximum(u, self.lower), self.upper)

    def initial_point(self):
        """Projection of the origin onto ``U``."""
        return self.project(np.zeros(self.n))

    def nonsmooth_value(self, u):
        return sum(blk.term.value(u[s]) for blk, s in zip(self.blocks, self.slices))

    def check_dim(self, u, name="u"):
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n,):
            raise ContractViolation(f"{name} has shape {u.shape}, expected ({self.n},)")
        return u

    def __repr__(self):
        return f"BlockProblem(N={self.N}, n={self.n}, m={self.m})"


@dataclass(frozen=True, eq=False)
class SaddleReference:
    """Known saddle point ``(u*, p*)`` of the Lagrangian."""

    u_star: np.ndarray
    p_star: np.ndarray
    objective_star: float
    degenerate: bool = False

    def check(self, prob, tol=1e-8):
        _, res = primal_residual(prob, self.u_star)
        if res > tol:
            raise ContractViolation(f"reference point is infeasible: ||Au*-b|| = {res:.3e}")
        return self


def eval_objective(prob, u):
    """``G(u) + sum_i J_i(u_i)``."""
    u = prob.check_dim(u)
    return prob.coupler.value(u) + prob.nonsmooth_value(u)


def primal_residual(prob, u):
    """Return ``(Au - b, ||Au - b||_2)``."""
    u = prob.check_dim(u)
    r = np.asarray(prob.A @ u).ravel() - prob.b
    return r, float(np.linalg.norm(r))


def spectral_norm_sq(A, tol=1e-8, max_iter=1000):
    """``lambda_max(A'A)`` by power iteration from the normalized all-ones vector.

    A zero matrix gives 0.  If the all-ones start happens to be orthogonal
    to the range of ``A'A`` the iteration is restarted from a fixed
    pseudo-random vector.
    """
    A = A if sp.issparse(A) else np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[1]
    starts = [np.ones(n), np.random.default_rng(12345).standard_normal(n)]
    for x in starts:
        x = x / np.linalg.norm(x)
        lam = 0.0
        for _ in range(max_iter):
            y = np.asarray(A.T @ (A @ x)).ravel()
            lam_new = float(x @ y)
            ny = np.linalg.norm(y)
            if ny == 0.0:
                lam = 0.0
                break
            x = y / ny
            if abs(lam_new - lam) <= tol * abs(lam_new):
                lam = lam_new
                break
            lam = lam_new
        if lam > 0.0:
            # one more Rayleigh quotient on the normalized iterate
            Ax = np.asarray(A @ x).ravel()
            return max(lam, float(Ax @ Ax))
    return 0.0


def build_difference_matrix(n):
    """First-difference matrix ``D`` of shape (n-1, n): ``(Du)_i = u_i - u_{i+1}``."""
    if int(n) != n or n < 2:
        raise InvalidArgument("difference matrix needs n >= 2")
    n = int(n)
    D = sp.diags([np.ones(n - 1), -np.ones(n - 1)], [0, 1], shape=(n - 1, n), format="csr")
    return as_matrix(D)
