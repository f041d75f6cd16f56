"""Core functions ``K^k`` and their Bregman distances.

Every core implemented here is a quadratic that is separable across
blocks, so the per-block subproblem only needs the block Hessian
``W_i = d^2 K^k / du_i^2``.  A 1-d array stands for a diagonal ``W_i``.

The anchor argument is the current iterate ``u^k``; it fixes the linear
part of a Jacobian core and the diagonal of a Newton core.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ContractViolation, InvalidArgument, SizeLimitExceeded
from .problem import spectral_norm_sq

__all__ = ["IdentityQuadratic", "NewtonDiagonal", "JacobianQuadratic",
           "QuadraticCoreMatrices", "core_value", "grad_core",
           "bregman_distance", "build_quadratic_core_matrices",
           "check_underline_psd", "psd_proximal_weight", "DENSE_ASSEMBLY_LIMIT"]

DENSE_ASSEMBLY_LIMIT = 5000
RANK_TOL = 1e-10


def _dense(M):
    return M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)


def _full_column_rank(M):
    s = np.linalg.svd(_dense(M), compute_uv=False)
    return s.size > 0 and s[-1] > RANK_TOL * s[0] and M.shape[0] >= M.shape[1]


class IdentityQuadratic:
    """``K(u) = sum_i (s_i / 2) ||u_i||^2``.

    Parameters
    ----------
    scale : float or array_like
        Either one positive scale, or one entry per coordinate (use
        :meth:`per_block` to expand per-block scales).
    """

    varying = False

    def __init__(self, scale=1.0):
        scale = np.asarray(scale, dtype=float)
        if np.any(scale <= 0):
            raise InvalidArgument("identity core scale must be positive")
        self.scale = scale

    @classmethod
    def per_block(cls, prob, scales):
        scales = np.broadcast_to(np.asarray(scales, dtype=float), (prob.N,))
        return cls(np.concatenate([np.full(s.stop - s.start, c)
                                   for s, c in zip(prob.slices, scales)]))

    def _scale(self, n):
        return np.broadcast_to(self.scale, (n,))

    def diag(self, anchor, n):
        return np.array(self._scale(n), dtype=float)

    def block_weight(self, i, sl, anchor):
        if self.scale.ndim == 0:
            return np.full(sl.stop - sl.start, float(self.scale))
        return self.scale[sl].copy()

    def value(self, u, anchor=None):
        return 0.5 * float(np.sum(self._scale(u.size) * u * u))

    def gradient(self, u, anchor=None):
        return self._scale(u.size) * u

    def bounds(self):
        return float(np.min(self.scale)), float(np.max(self.scale))

    def iteration_bounds(self, anchor):
        return self.bounds()

    def hessian(self, anchor, n):
        return np.diag(self._scale(n).astype(float))

    def __repr__(self):
        return f"IdentityQuadratic(scale={self.scale.tolist()})"


class NewtonDiagonal:
    """``K^k(u) = 0.5 ||u - u^k||^2_{M^k}`` with ``M^k = diag(oracle(u^k))``.

    Diagonal entries are clipped to ``[m_floor, m_ceil]`` so the uniform
    strong-convexity and smoothness bounds are exactly ``m_floor`` and
    ``m_ceil``.
    """

    varying = True

    def __init__(self, diag_oracle, m_floor=1e-8, m_ceil=1e8):
        if not 0 < m_floor <= m_ceil or not np.isfinite(m_ceil):
            raise InvalidArgument("need 0 < m_floor <= m_ceil < inf")
        self.diag_oracle = diag_oracle
        self.m_floor = float(m_floor)
        self.m_ceil = float(m_ceil)

    def diag(self, anchor, n=None):
        if anchor is None:
            raise ContractViolation("Newton core needs the anchor u^k")
        d = np.asarray(self.diag_oracle(anchor), dtype=float).ravel()
        if d.shape != anchor.shape:
            raise ContractViolation("diagonal oracle returned the wrong length")
        return np.clip(d, self.m_floor, self.m_ceil)

    def block_weight(self, i, sl, anchor):
        return self.diag(anchor)[sl]

    def value(self, u, anchor):
        d = u - anchor
        return 0.5 * float(np.sum(self.diag(anchor) * d * d))

    def gradient(self, u, anchor):
        return self.diag(anchor) * (u - anchor)

    def bounds(self):
        return self.m_floor, self.m_ceil

    def iteration_bounds(self, anchor):
        d = self.diag(anchor)
        return float(d.min()), float(d.max())

    def hessian(self, anchor, n):
        return np.diag(self.diag(anchor))

    def __repr__(self):
        return f"NewtonDiagonal(m_floor={self.m_floor}, m_ceil={self.m_ceil})"


class JacobianQuadratic:
    """Jacobian regularization core

    ``K^k(u) = sum_i theta_i/2 ||A_i u_i + sum_{j!=i} A_j u_j^k - b||^2
    + sum_i alpha_i/2 ||P_i u_i||^2``.

    Parameters
    ----------
    prob : BlockProblem
    theta, alpha : float or sequence of length N
        Nonnegative.
    P : sequence of matrices, optional
        ``P_i`` with ``n_i`` columns; identity by default.
    strict : bool
        Require every block weight to be positive definite.  Turning this
        off admits degenerate cores (for inspecting ``H``); they cannot be
        used by the solver.
    """

    varying = False

    def __init__(self, prob, theta, alpha, P=None, strict=True):
        N = prob.N
        theta = np.broadcast_to(np.asarray(theta, dtype=float), (N,)).copy()
        alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (N,)).copy()
        if np.any(theta < 0) or np.any(alpha < 0):
            raise InvalidArgument("theta and alpha must be nonnegative")
        if P is None:
            P = [np.eye(blk.size) for blk in prob.blocks]
        P = [np.atleast_2d(_dense(Pi)) for Pi in P]
        if len(P) != N:
            raise ContractViolation("need one P_i per block")
        A_blocks = [_dense(blk.A) for blk in prob.blocks]
        for i, (Ai, Pi) in enumerate(zip(A_blocks, P)):
            if Pi.shape[1] != Ai.shape[1]:
                raise ContractViolation(f"P_{i} must have {Ai.shape[1]} columns")
            ok_a = theta[i] > 0 and _full_column_rank(Ai)
            ok_p = alpha[i] > 0 and _full_column_rank(Pi)
            if strict and not (ok_a or ok_p):
                raise InvalidArgument(
                    f"block {i}: need A_i full column rank with theta_i > 0 "
                    "or P_i full column rank with alpha_i > 0")
        self.theta, self.alpha, self.P = theta, alpha, P
        self.A_blocks = A_blocks
        self.A = prob.A
        self.b = prob.b
        self.slices = prob.slices
        self.weights = [theta[i] * Ai.T @ Ai + alpha[i] * Pi.T @ Pi
                        for i, (Ai, Pi) in enumerate(zip(A_blocks, P))]
        self._diag = [W.ndim == 2 and np.count_nonzero(W - np.diag(np.diag(W))) == 0
                      for W in self.weights]
        lam_a = [np.linalg.eigvalsh(Ai.T @ Ai)[0] for Ai in A_blocks]
        lam_p = [np.linalg.eigvalsh(Pi.T @ Pi)[0] for Pi in P]
        beta = (min(t * la for t, la in zip(theta, lam_a))
                + min(a * lp for a, lp in zip(alpha, lam_p)))
        if beta <= 0:
            # mixed theta/alpha patterns: the paired formula degenerates
            beta = min(np.linalg.eigvalsh(W)[0] for W in self.weights)
        self.beta = float(beta)
        self.B = float(max(np.linalg.eigvalsh(W)[-1] for W in self.weights))

    def _offsets(self, anchor):
        r = np.asarray(self.A @ anchor).ravel() - self.b
        return [r - Ai @ anchor[s] for Ai, s in zip(self.A_blocks, self.slices)]

    def diag(self, anchor, n=None):
        if not all(self._diag):
            return None
        return np.concatenate([np.diag(W) for W in self.weights])

    def block_weight(self, i, sl, anchor):
        W = self.weights[i]
        return np.diag(W).copy() if self._diag[i] else W

    def value(self, u, anchor):
        total = 0.0
        for i, (Ai, Pi, s, c) in enumerate(zip(self.A_blocks, self.P, self.slices,
                                                self._offsets(anchor))):
            ri = Ai @ u[s] + c
            pi = Pi @ u[s]
            total += 0.5 * self.theta[i] * ri @ ri + 0.5 * self.alpha[i] * pi @ pi
        return float(total)

    def gradient(self, u, anchor):
        g = np.empty_like(u, dtype=float)
        for i, (Ai, Pi, s, c) in enumerate(zip(self.A_blocks, self.P, self.slices,
                                                self._offsets(anchor))):
            g[s] = self.theta[i] * Ai.T @ (Ai @ u[s] + c) + self.alpha[i] * Pi.T @ (Pi @ u[s])
        return g

    def bounds(self):
        return self.beta, self.B

    def iteration_bounds(self, anchor):
        return self.bounds()

    def hessian(self, anchor=None, n=None):
        n = self.slices[-1].stop
        if n > DENSE_ASSEMBLY_LIMIT:
            raise SizeLimitExceeded(
                f"dense assembly of H limited to n <= {DENSE_ASSEMBLY_LIMIT}; "
                "check the step-size bound instead (it needs no eigensolve)")
        H = np.zeros((n, n))
        for W, s in zip(self.weights, self.slices):
            H[s, s] = W
        return H

    def __repr__(self):
        return f"JacobianQuadratic(theta={self.theta.tolist()}, alpha={self.alpha.tolist()})"


def core_value(core_fn, u, anchor=None):
    return core_fn.value(np.asarray(u, dtype=float), anchor)


def grad_core(core_fn, u, anchor=None):
    return core_fn.gradient(np.asarray(u, dtype=float), anchor)


def bregman_distance(core_fn, u, v, anchor=None):
    """``D(u, v) = K(u) - K(v) - <grad K(v), u - v>`` for the core at `anchor`.

    All cores are quadratic, so this is evaluated as ``0.5 d' W d`` with
    ``d = u - v``, which avoids cancellation.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or (anchor is not None and np.shape(anchor) != u.shape):
        raise ContractViolation("bregman_distance: vectors must share one shape")
    d = u - v
    diag = core_fn.diag(anchor, u.size)
    if diag is not None:
        return max(0.5 * float(np.sum(diag * d * d)), 0.0)
    total = 0.0
    for i, s in enumerate(core_fn.slices):
        W = core_fn.weights[i]
        total += 0.5 * d[s] @ W @ d[s]
    return max(float(total), 0.0)


@dataclass(frozen=True)
class QuadraticCoreMatrices:
    """``H = (1/eps) blockdiag(W_i)``, ``H_over = H - gamma A'A``,
    ``H_under = H_over - B_G I``."""

    H: np.ndarray
    H_over: np.ndarray
    H_under: np.ndarray


def build_quadratic_core_matrices(prob, core_fn, gamma, eps, B_G=None):
    if not isinstance(core_fn, JacobianQuadratic):
        raise InvalidArgument("quadratic core matrices need a JacobianQuadratic core")
    if eps <= 0:
        raise InvalidArgument("eps must be positive")
    if B_G is None:
        B_G = prob.coupler.lipschitz
    if prob.n > DENSE_ASSEMBLY_LIMIT:
        raise SizeLimitExceeded(
            f"dense assembly limited to n <= {DENSE_ASSEMBLY_LIMIT}; "
            "use the eigenvalue-free step-size check of validate_parameters")
    H = core_fn.hessian() / eps
    AtA = _dense(prob.A.T @ prob.A)
    H_over = H - gamma * AtA
    H_under = H_over - B_G * np.eye(prob.n)
    return QuadraticCoreMatrices(H, H_over, H_under)


def check_underline_psd(mats, tol=1e-10):
    """Return ``(lambda_min(H_under) >= -tol, lambda_min(H_under))``."""
    Hu = np.atleast_2d(mats.H_under if isinstance(mats, QuadraticCoreMatrices) else mats)
    lam = float(np.linalg.eigvalsh(0.5 * (Hu + Hu.T))[0])
    return lam >= -tol, lam


def lambda_max_AtA(prob):
    return spectral_norm_sq(prob.A)


def psd_proximal_weight(prob, theta, gamma, eps=1.0, B_G=None, margin=1.05, floor=1e-3):
    """Smallest common ``alpha`` (with ``P_i = I``) that makes ``H_under`` PSD.

    ``H_under`` shifts by ``alpha / eps`` times the identity, so the
    threshold is ``eps (B_G - lambda_min(H_0 - gamma A'A))`` with ``H_0`` the
    core at ``alpha = 0``.  The result is scaled by `margin` and padded by
    ``eps * floor``.
    """
    if B_G is None:
        B_G = prob.coupler.lipschitz
    n = prob.n
    if n > DENSE_ASSEMBLY_LIMIT:
        raise SizeLimitExceeded(f"dense assembly limited to n <= {DENSE_ASSEMBLY_LIMIT}")
    theta = np.broadcast_to(np.asarray(theta, dtype=float), (prob.N,))
    H0 = np.zeros((n, n))
    for t, blk, s in zip(theta, prob.blocks, prob.slices):
        Ai = _dense(blk.A)
        H0[s, s] = t * Ai.T @ Ai / eps
    lam = np.linalg.eigvalsh(H0 - gamma * _dense(prob.A.T @ prob.A))[0]
    return float(eps * (margin * max(B_G - lam, 0.0) + floor))
