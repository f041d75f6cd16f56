"""Three sparse-learning problems written in block form, with their
closed-form block updates.

Features are stored as ``B`` of shape ``(n_features, m_samples)`` (one
column per sample) and labels ``b`` in {-1, +1}.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .core import IdentityQuadratic, JacobianQuadratic, NewtonDiagonal
from .errors import ContractViolation, InvalidArgument
from .problem import (BlockProblem, BlockSpec, ConstraintSet, L1Term,
                      QuadraticCoupler, SmoothCoupler, ZeroTerm,
                      build_difference_matrix, spectral_norm_sq)
from .prox import shrink
from .solver import SolverParams

__all__ = [
    "FusedSvmInstance", "LogisticInstance", "DsvmInstance",
    "SquaredHingeCoupler", "LogisticCoupler",
    "build_fused_svm", "fused_svm_u_update", "fused_svm_z_update",
    "fused_svm_objective", "fused_svm_split_objective",
    "build_logistic", "logistic_newton_diag", "logistic_updates",
    "logistic_objective", "build_dsvm", "dsvm_update",
]

EXP_CLAMP = 500.0


def _dense(M):
    return M.toarray() if hasattr(M, "toarray") else np.asarray(M, dtype=float)


def _check_labels(labels, m):
    labels = np.asarray(labels, dtype=float).ravel()
    if labels.size != m:
        raise ContractViolation(f"expected {m} labels, got {labels.size}")
    if not np.all(np.isin(labels, (-1.0, 1.0))):
        raise InvalidArgument("labels must be -1 or +1")
    return labels


# -- Fused-LASSO SVM with quadratic hinge loss ---------------------------------

class SquaredHingeCoupler(SmoothCoupler):
    """``(1/m) sum_i max(0, 1 - b_i B_i'u)^2`` acting on the first ``n`` of
    ``n_total`` variables.  C^1 with gradient Lipschitz ``(2/m) lambda_max(BB')``.
    """

    def __init__(self, B, labels, n_total=None):
        B = _dense(B)
        n, m = B.shape
        super().__init__(n if n_total is None else n_total,
                         2.0 / m * spectral_norm_sq(B.T))
        self.B, self.labels, self.n_u, self.m = B, labels, n, m

    def margins(self, u):
        return np.maximum(0.0, 1.0 - self.labels * (self.B.T @ u[: self.n_u]))

    def value(self, u):
        h = self.margins(u)
        return float(h @ h) / self.m

    def gradient(self, u):
        g = np.zeros(self.n)
        g[: self.n_u] = -2.0 / self.m * (self.B @ (self.labels * self.margins(u)))
        return g


@dataclass(frozen=True, eq=False)
class FusedSvmInstance:
    """Fused-LASSO SVM data and algorithm knobs.

    ``alpha1``/``alpha2`` default to the smallest equal proximal weights
    that make ``H_under`` positive semidefinite (times 1.05, plus 1e-3).
    """

    B: np.ndarray
    labels: np.ndarray
    lam1: float
    lam2: float
    gamma: float = 1.0
    alpha1: float = None
    alpha2: float = None

    def __post_init__(self):
        B = _dense(self.B)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "labels", _check_labels(self.labels, B.shape[1]))
        if B.shape[0] < 2:
            raise InvalidArgument("fused penalty needs at least two features")
        if not (self.lam1 > 0 and self.lam2 > 0 and self.gamma > 0):
            raise InvalidArgument("lam1, lam2 and gamma must be positive")
        object.__setattr__(self, "D", _dense(build_difference_matrix(B.shape[0])))
        if self.alpha1 is None or self.alpha2 is None:
            a = self._safe_alpha()
            object.__setattr__(self, "alpha1", a if self.alpha1 is None else self.alpha1)
            object.__setattr__(self, "alpha2", a if self.alpha2 is None else self.alpha2)
        if not (self.alpha1 > 0 and self.alpha2 > 0):
            raise InvalidArgument("alpha1 and alpha2 must be positive")

    @property
    def n(self):
        return self.B.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    def _safe_alpha(self):
        n, D, g = self.n, self.D, self.gamma
        A = np.hstack([D, -np.eye(n - 1)])
        H0 = np.diag(np.concatenate([g * np.sum(D * D, axis=0), np.full(n - 1, g)]))
        B_G = 2.0 / self.m * spectral_norm_sq(self.B.T)
        lam = np.linalg.eigvalsh(H0 - g * A.T @ A)[0]
        return 1.05 * max(B_G - lam, 0.0) + 1e-3

    def params(self, **kw):
        return SolverParams(eps=1.0, gamma=self.gamma, rho=self.gamma, **kw)

    def split(self, x):
        return x[: self.n], x[self.n:]


def build_fused_svm(inst):
    """Problem over n scalar blocks ``u_j`` and one block ``z`` with ``Du - z = 0``.

    Returns ``(problem, core)``; the core is the Jacobian quadratic with
    ``theta = gamma`` everywhere and ``alpha = (alpha1, ..., alpha1, alpha2)``.
    Use ``inst.params()`` for the matching ``eps = 1`` parameters.
    """
    n = inst.n
    blocks = [BlockSpec(inst.D[:, [j]], L1Term(inst.lam1)) for j in range(n)]
    blocks.append(BlockSpec(-np.eye(n - 1), L1Term(inst.lam2)))
    coupler = SquaredHingeCoupler(inst.B, inst.labels, n_total=2 * n - 1)
    prob = BlockProblem(blocks, coupler, np.zeros(n - 1))
    alpha = [inst.alpha1] * n + [inst.alpha2]
    core = JacobianQuadratic(prob, theta=inst.gamma, alpha=alpha)
    return prob, core


def _fused_state(state, inst):
    x = np.asarray(state.u, dtype=float)
    return x[: inst.n], x[inst.n:], np.asarray(state.p, dtype=float)


def fused_svm_u_update(j, state, inst):
    """``u_j^{k+1} = shrink(r1, 1/mu1)`` with

    ``mu1 = (gamma ||D_j||^2 + alpha1) / lam1`` and
    ``r1 = [alpha1 u_j - gamma D_j'(sum_{l!=j} D_l u_l - z)
    + (2/m) sum_i B_ij b_i max(0, 1 - b_i B_i'u) - D_j'p] / (gamma ||D_j||^2 + alpha1)``.
    """
    u, z, p = _fused_state(state, inst)
    D, g, a1 = inst.D, inst.gamma, inst.alpha1
    Dj = D[:, j]
    denom = g * (Dj @ Dj) + a1
    others = D @ u - Dj * u[j] - z
    hinge = np.maximum(0.0, 1.0 - inst.labels * (inst.B.T @ u))
    r1 = (a1 * u[j] - g * (Dj @ others)
          + 2.0 / inst.m * (inst.B[j] @ (inst.labels * hinge)) - Dj @ p) / denom
    mu1 = denom / inst.lam1
    return shrink(r1, 1.0 / mu1)


def fused_svm_z_update(state, inst):
    """``shrink((gamma D u + alpha2 z + p) / (gamma + alpha2), lam2 / (gamma + alpha2))``."""
    u, z, p = _fused_state(state, inst)
    s = inst.gamma + inst.alpha2
    if s == 0:
        raise InvalidArgument("gamma + alpha2 must be nonzero")
    return shrink((inst.gamma * (inst.D @ u) + inst.alpha2 * z + p) / s, inst.lam2 / s)


def fused_svm_objective(inst, u):
    """Unconstrained objective with the fused penalty written on ``u``."""
    u = np.asarray(u, dtype=float)
    h = np.maximum(0.0, 1.0 - inst.labels * (inst.B.T @ u))
    return (float(h @ h) / inst.m + inst.lam1 * np.abs(u).sum()
            + inst.lam2 * np.abs(np.diff(u)).sum())


def fused_svm_split_objective(inst, u, z):
    h = np.maximum(0.0, 1.0 - inst.labels * (inst.B.T @ u))
    return float(h @ h) / inst.m + inst.lam1 * np.abs(u).sum() + inst.lam2 * np.abs(z).sum()


# -- l1-regularized logistic regression ------------------------------------------

def _sigmoid(t):
    return expit(np.clip(t, -EXP_CLAMP, EXP_CLAMP))


class LogisticCoupler(SmoothCoupler):
    """``f(z) = (1/m) sum_i log(1 + exp(-b_i z_i))`` on the trailing ``m``
    variables of ``(u, z)``."""

    def __init__(self, labels, n_u):
        m = labels.size
        super().__init__(n_u + m, float(np.max(labels ** 2)) / (4.0 * m))
        self.labels, self.n_u, self.m = labels, n_u, m

    def value(self, x):
        z = x[self.n_u:]
        return float(np.sum(np.logaddexp(0.0, -self.labels * z))) / self.m

    def gradient(self, x):
        g = np.zeros(self.n)
        z = x[self.n_u:]
        g[self.n_u:] = -self.labels * _sigmoid(-self.labels * z) / self.m
        return g

    def hessian_diag(self, z):
        b = self.labels
        return b * b * _sigmoid(b * z) * _sigmoid(-b * z) / self.m


@dataclass(frozen=True, eq=False)
class LogisticInstance:
    B: np.ndarray
    labels: np.ndarray
    lam: float
    eps: float = 1.0
    gamma: float = 1.0
    rho: float = None
    m_floor: float = 1e-8

    def __post_init__(self):
        B = _dense(self.B)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "labels", _check_labels(self.labels, B.shape[1]))
        if not (self.lam > 0 and self.eps > 0 and self.gamma > 0 and self.m_floor > 0):
            raise InvalidArgument("lam, eps, gamma and m_floor must be positive")
        if self.rho is None:
            object.__setattr__(self, "rho", self.gamma)

    @property
    def n(self):
        return self.B.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    def params(self, **kw):
        return SolverParams(eps=self.eps, gamma=self.gamma, rho=self.rho, **kw)


def logistic_newton_diag(inst, z):
    """Diagonal of the loss Hessian, ``b_i^2 e^{-b_i z_i} / (m (1 + e^{-b_i z_i})^2)``."""
    b = inst.labels
    return b * b * _sigmoid(b * z) * _sigmoid(-b * z) / inst.m


def build_logistic(inst):
    """Blocks ``u`` (l1) and ``z`` (free) with ``B'u - z = 0`` and a Newton core.

    The core is ``0.5||u - u^k||^2 + 0.5||z - z^k||^2_{M^k}`` with ``M^k``
    floored at ``inst.m_floor``.
    """
    n, m = inst.n, inst.m
    blocks = [BlockSpec(inst.B.T, L1Term(inst.lam)), BlockSpec(-np.eye(m), ZeroTerm())]
    prob = BlockProblem(blocks, LogisticCoupler(inst.labels, n), np.zeros(m))

    def diag(x):
        return np.concatenate([np.ones(n), logistic_newton_diag(inst, x[n:])])

    core = NewtonDiagonal(diag, m_floor=inst.m_floor, m_ceil=1.0)
    return prob, core


def logistic_updates(state, inst):
    """Closed-form ``(u^{k+1}, z^{k+1})``.

    ``u = shrink(u - eps s, eps lam)`` with ``s = B(p + gamma(B'u - z))`` and
    ``z_i + eps b_i sig(-b_i z_i) / (M_i m) + eps (p_i + gamma(B_i'u - z_i)) / M_i``.
    """
    x = np.asarray(state.u, dtype=float)
    u, z = x[: inst.n], x[inst.n:]
    p = np.asarray(state.p, dtype=float)
    eps, g, b = inst.eps, inst.gamma, inst.labels
    y = p + g * (inst.B.T @ u - z)
    u_new = shrink(u - eps * (inst.B @ y), eps * inst.lam)
    M = np.clip(logistic_newton_diag(inst, z), inst.m_floor, 1.0)
    z_new = z + eps * b * _sigmoid(-b * z) / (M * inst.m) + eps * y / M
    return u_new, z_new


def logistic_objective(inst, u):
    t = inst.labels * (inst.B.T @ np.asarray(u, dtype=float))
    return float(np.sum(np.logaddexp(0.0, -t))) / inst.m + inst.lam * np.abs(u).sum()


# -- dual SVM box QP ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DsvmInstance:
    """``min 0.5 u'Qu - e'u  s.t. y'u = 0, 0 <= u <= c``."""

    Q: np.ndarray
    e: np.ndarray
    y: np.ndarray
    c: float = 1.0
    eps: float = None
    gamma: float = 1.0
    rho: float = None

    def __post_init__(self):
        Q = _dense(self.Q)
        n = Q.shape[0]
        e = np.asarray(self.e, dtype=float).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        if Q.shape != (n, n) or e.size != n or y.size != n:
            raise ContractViolation("Q, e and y dimensions disagree")
        if np.abs(Q - Q.T).max() > 1e-12:
            raise InvalidArgument("Q must be symmetric")
        if np.linalg.eigvalsh(Q)[0] < -1e-10:
            raise InvalidArgument("Q must be positive semidefinite")
        if not self.c > 0:
            raise InvalidArgument("box bound c must be positive")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "y", y)
        if self.eps is None:
            lam = float(np.linalg.eigvalsh(Q)[-1])
            object.__setattr__(self, "eps", 0.9 / (lam + self.gamma * float(y @ y)))
        if self.rho is None:
            object.__setattr__(self, "rho", self.gamma)

    @property
    def n(self):
        return self.Q.shape[0]

    def params(self, **kw):
        return SolverParams(eps=self.eps, gamma=self.gamma, rho=self.rho, **kw)


def build_dsvm(inst):
    """Single block, box ``[0, c]^n``, constraint ``y'u = 0`` and identity core."""
    blk = BlockSpec(inst.y.reshape(1, -1), ZeroTerm(), ConstraintSet.box(0.0, inst.c, inst.n))
    prob = BlockProblem([blk], QuadraticCoupler(inst.Q, -inst.e), np.zeros(1))
    return prob, IdentityQuadratic(1.0)


def dsvm_update(state, inst):
    """``u+ = min(c, max(0, u - eps(Qu + p y + gamma (y'u) y - e)))``, ``p+ = p + rho y'u+``."""
    u = np.asarray(state.u, dtype=float)
    p = float(np.asarray(state.p, dtype=float).ravel()[0])
    y = inst.y
    step = inst.Q @ u + p * y + inst.gamma * (y @ u) * y - inst.e
    u_new = np.minimum(inst.c, np.maximum(0.0, u - inst.eps * step))
    return u_new, np.array([p + inst.rho * (y @ u_new)])
