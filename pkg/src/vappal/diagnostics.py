"""Post-processing that checks convergence guarantees on recorded runs.

Nothing here changes iterates.  The functions take traces, iterate arrays
and parameter objects and return numbers or :class:`CheckReport` objects.
"""

import itertools
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import bregman_distance
from .errors import ContractViolation, DiagnosticUnavailable, InvalidArgument
from .problem import (QuadraticCoupler, SaddleReference, ZeroTerm,
                      eval_objective)

__all__ = [
    "TraceRecord", "Trace", "CheckReport", "ErgodicPoint", "RateFit",
    "merit_lambda", "ergodic_average", "ergodic_bound", "vi_gap",
    "nonergodic_nu", "nonergodic_bound_check", "increment_monotonicity_check",
    "rate_fit", "reference_saddle", "block_stationarity",
]

TRACE_FIELDS = ("k", "objective", "primal_residual_norm", "du_norm", "dp_norm",
                "du_Hbar_sq", "lambda_merit", "wall_ms")


@dataclass(frozen=True)
class TraceRecord:
    """Diagnostics for iterate ``k`` (after the k-th update).

    ``du_norm = ||u^k - u^{k-1}||``, ``dp_norm = ||p^k - p^{k-1}||``.
    ``du_Hbar_sq`` is only set for quadratic Jacobian cores and
    ``lambda_merit`` only when a saddle reference was supplied.
    """

    k: int
    objective: float
    primal_residual_norm: float
    du_norm: float
    dp_norm: float
    du_Hbar_sq: float = None
    lambda_merit: float = None
    wall_ms: float = None


@dataclass
class Trace:
    records: list = field(default_factory=list)
    reason: str = None
    lambda0: float = None
    iterates_u: list = None
    iterates_p: list = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def column(self, name):
        vals = [getattr(r, name) for r in self.records]
        return np.array([np.nan if v is None else v for v in vals], dtype=float)

    def U(self):
        return np.asarray(self.iterates_u)

    def P(self):
        return np.asarray(self.iterates_p)


@dataclass
class CheckReport:
    name: str
    status: str
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.status == "pass"

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ErgodicPoint:
    u_bar: np.ndarray
    p_bar: np.ndarray
    t: int
    sigma: float


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    tail_ratio: float
    o_one_over_t: bool


def merit_lambda(core_fn, params, m_k, state, ref):
    """Merit value at ``(u^k, p^k)``::

        m^k * ( D_K^k(u*, u^k) + eps/(2 rho) ||p^k - p*||^2
                - gamma eps / 2 ||A u^k - b||^2 )

    The core is anchored at ``u^k``.
    """
    if ref is None:
        raise DiagnosticUnavailable("merit function needs a saddle reference")
    eps, rho, gamma = params.eps, params.rho, params.gamma
    d = bregman_distance(core_fn, ref.u_star, state.u, state.u)
    dp = state.p - ref.p_star
    r = state.residual
    return m_k * (d + eps / (2 * rho) * float(dp @ dp) - gamma * eps / 2 * float(r @ r))


def _shifted_iterates(prob, U, P, gamma):
    # w~^k = (u^{k+1}, p^k + gamma (A u^{k+1} - b)) for k = 0..K-1
    U = np.asarray(U, dtype=float)
    P = np.asarray(P, dtype=float)
    R = np.asarray(prob.A @ U[1:].T).T - prob.b
    return U[1:], P[:-1] + gamma * R


def ergodic_average(prob, iterates_u, iterates_p, weights, gamma, t):
    """Weighted average of the shifted iterates ``w~^0 .. w~^t``.

    Needs ``u^0 .. u^{t+1}`` and ``p^0 .. p^t``.
    """
    iterates_u = np.asarray(iterates_u, dtype=float)
    iterates_p = np.asarray(iterates_p, dtype=float)
    if t < 0 or t + 2 > len(iterates_u) or t + 1 > len(iterates_p):
        raise InvalidArgument(f"horizon t={t} exceeds the recorded iterates")
    w = np.asarray(weights, dtype=float)[: t + 1]
    if w.size < t + 1 or np.any(w <= 0):
        raise InvalidArgument("need t+1 positive weights")
    Ut, Pt = _shifted_iterates(prob, iterates_u[: t + 2], iterates_p[: t + 2], gamma)
    sigma = float(w.sum())
    return ErgodicPoint(w @ Ut[: t + 1] / sigma, w @ Pt[: t + 1] / sigma, t, sigma)


def ergodic_path(prob, iterates_u, iterates_p, weights, gamma):
    """All ergodic points for t = 0..K-1 via running sums."""
    Ut, Pt = _shifted_iterates(prob, iterates_u, iterates_p, gamma)
    T = len(Ut)
    w = np.asarray(weights, dtype=float)[:T]
    sig = np.cumsum(w)
    ub = np.cumsum(w[:, None] * Ut, axis=0) / sig[:, None]
    pb = np.cumsum(w[:, None] * Pt, axis=0) / sig[:, None]
    return [ErgodicPoint(ub[t], pb[t], t, float(sig[t])) for t in range(T)]


def vi_gap(prob, w_bar, w):
    """``H(w_bar) - H(w) + <F(w), Omega(w_bar) - Omega(w)>``.

    ``H(w) = (G+J)(u)``, ``F(w) = (p, b - Au)``, ``Omega(w) = (Au - b, p)``.
    Points are ``(u, p)`` pairs or :class:`ErgodicPoint`.
    """
    if isinstance(w_bar, ErgodicPoint):
        w_bar = (w_bar.u_bar, w_bar.p_bar)
    ub, pb = (np.asarray(x, dtype=float) for x in w_bar)
    u, p = (np.asarray(x, dtype=float) for x in w)
    if pb.shape != (prob.m,) or p.shape != (prob.m,):
        raise ContractViolation("dual components must have length m")
    if not np.all(np.isfinite(p)):
        raise ContractViolation("test point dual component must be finite")
    Aub = np.asarray(prob.A @ ub).ravel()
    Au = np.asarray(prob.A @ u).ravel()
    return (eval_objective(prob, ub) - eval_objective(prob, u)
            + float(p @ (Aub - Au)) + float((prob.b - Au) @ (pb - p)))


def ergodic_bound(t, delta, B, eps, rho, u, u0, p, p0):
    """Right-hand side ``[B/(2 eps)||u-u0||^2 + 1/(2 rho)||p-p0||^2] / ((t+1) delta)``."""
    du = np.asarray(u) - np.asarray(u0)
    dp = np.asarray(p) - np.asarray(p0)
    return (B / (2 * eps) * float(du @ du) + float(dp @ dp) / (2 * rho)) / ((t + 1) * delta)


def nonergodic_nu(beta, eps, B_G, gamma, lam_max, rho, delta, m_min=1.0):
    """Explicit ``nu = min(nu1, nu2)`` from the non-ergodic rate argument.

    ``nu1 = m/2 (beta - eps (B_G + gamma lam_max))`` and
    ``nu2 = m eps ((1+delta) gamma - rho) / (2 rho^2)`` with ``m`` the
    smallest weight.  Nonpositive values mean the parameters are outside
    the regime.
    """
    nu1 = m_min / 2 * (beta - eps * (B_G + gamma * lam_max))
    nu2 = m_min * eps * ((1 + delta) * gamma - rho) / (2 * rho ** 2)
    return min(nu1, nu2)


def nonergodic_bound_check(trace, lambda0, nu, horizon=None):
    """Check ``min_{k<=t} ||du||^2 + ||dp||^2 <= Lambda^0 / ((t+1) nu)`` for all t."""
    if nu is None or nu <= 0:
        return CheckReport("nonergodic_bound", "unavailable",
                           {"reason": "nu <= 0: parameters outside the step-bound regime"})
    s = trace.column("du_norm") ** 2 + trace.column("dp_norm") ** 2
    if horizon is not None:
        s = s[:horizon + 1]
    lhs = np.minimum.accumulate(s)
    t = np.arange(len(s))
    rhs = lambda0 / ((t + 1) * nu)
    bad = np.flatnonzero(lhs > rhs)
    return CheckReport("nonergodic_bound", "pass" if bad.size == 0 else "fail",
                       {"checked": int(len(s)), "violations": int(bad.size),
                        "first_violation": int(bad[0]) if bad.size else None,
                        "nu": float(nu), "lambda0": float(lambda0)})


def increment_monotonicity_check(trace, rho, preconditions, slack=1e-10):
    """Monotonicity of ``||du||^2_{H_over} + ||dp||^2 / rho`` along the run.

    `preconditions` is a bool or a parameter report; when unmet the report
    is ``unavailable`` and nothing is claimed.
    """
    ok = getattr(preconditions, "increments_ok", preconditions)
    if not ok:
        return CheckReport("increment_monotonicity", "unavailable",
                           {"reason": "preconditions unmet"})
    hb = trace.column("du_Hbar_sq")
    if np.any(np.isnan(hb)):
        return CheckReport("increment_monotonicity", "unavailable",
                           {"reason": "trace has no H_over norms (not a quadratic core)"})
    a = hb + trace.column("dp_norm") ** 2 / rho
    inc = np.diff(a)
    bad = np.flatnonzero(inc > slack)
    return CheckReport("increment_monotonicity", "pass" if bad.size == 0 else "fail",
                       {"checked": int(a.size), "violations": int(bad.size),
                        "max_increase": float(inc.max()) if inc.size else 0.0})


def increment_series(trace, rho):
    return trace.column("du_Hbar_sq") + trace.column("dp_norm") ** 2 / rho


def rate_fit(series, window=None):
    """Log-log slope of ``a_k`` (k = 1, 2, ...) and an o(1/t) verdict.

    The verdict compares ``k a_k`` at ``k = t`` (last entry) with its value
    at ``k = t // 10``; it is true when the tail is at most 10% of it
    (a relative slack of 1e-9 absorbs rounding in the boundary case).

    Parameters
    ----------
    series : array_like
        ``a_1, ..., a_t``; at least 20 entries, positive inside the window.
    window : (start, stop), optional
        1-based inclusive range of k used for the slope.
    """
    a = np.asarray(series, dtype=float)
    if a.size < 20:
        raise InvalidArgument("rate_fit needs at least 20 points")
    k = np.arange(1, a.size + 1)
    lo, hi = window if window is not None else (1, a.size)
    sel = (k >= lo) & (k <= hi)
    ks, av = k[sel], a[sel]
    if np.any(av <= 0):
        raise InvalidArgument("rate_fit needs a positive series inside the window")
    slope, intercept = np.polyfit(np.log(ks), np.log(av), 1)
    t = a.size
    head = (t // 10) * a[t // 10 - 1]
    tail = t * a[-1]
    ratio = tail / head if head > 0 else np.inf
    return RateFit(float(slope), float(intercept), float(ratio),
                   bool(tail <= 0.1 * head * (1 + 1e-9)))


def block_stationarity(prob, u, p):
    """Per-block prox-gradient residual of the Lagrangian at ``(u, p)``.

    ``||u_i - prox_{J_i + U_i}(u_i - grad_i G(u) - A_i' p)||``; zero exactly
    at a saddle point.
    """
    u = prob.check_dim(u)
    g = prob.coupler.gradient(u) + np.asarray(prob.A.T @ p).ravel()
    out = []
    for blk, s in zip(prob.blocks, prob.slices):
        target = u[s] - g[s]
        x = blk.solve(-target, np.ones(blk.size))
        out.append(float(np.linalg.norm(u[s] - x)))
    return out


def reference_saddle(prob, max_n=12, tol=1e-9):
    """Exact saddle point of a small QP by active-set enumeration.

    Each variable is free, at its lower bound or at its upper bound.  For
    every pattern the equality-constrained KKT system is solved and the
    pattern is kept when the point is feasible and the bound multipliers
    have the right sign.  The first admissible pattern in enumeration order
    wins; ``degenerate`` is set when the KKT system is rank deficient or a
    different admissible pattern gives a different point.
    """
    if not isinstance(prob.coupler, QuadraticCoupler):
        raise DiagnosticUnavailable("reference_saddle handles quadratic couplers only")
    if not all(isinstance(blk.term, ZeroTerm) for blk in prob.blocks):
        raise DiagnosticUnavailable("reference_saddle needs J_i = 0 on every block")
    n, m = prob.n, prob.m
    if n > max_n:
        raise DiagnosticUnavailable(f"active-set enumeration limited to n <= {max_n}")
    Q = prob.coupler.hessian(None)
    q = prob.coupler.q
    A = prob.A.toarray() if hasattr(prob.A, "toarray") else np.asarray(prob.A)
    b = prob.b
    lo, hi = prob.lower, prob.upper
    scale = 1.0 + max(np.abs(Q).max(), np.abs(A).max(), np.abs(q).max(), np.abs(b).max())
    options = [[0] + ([-1] if np.isfinite(lo[j]) else []) + ([1] if np.isfinite(hi[j]) else [])
               for j in range(n)]
    found = []
    for pattern in itertools.product(*options):
        pattern = np.array(pattern)
        F = pattern == 0
        X = ~F
        u = np.where(pattern < 0, lo, np.where(pattern > 0, hi, 0.0))
        nf = int(F.sum())
        K = np.zeros((nf + m, nf + m))
        K[:nf, :nf] = Q[np.ix_(F, F)]
        K[:nf, nf:] = A[:, F].T
        K[nf:, :nf] = A[:, F]
        rhs = np.concatenate([-q[F] - Q[np.ix_(F, X)] @ u[X], b - A[:, X] @ u[X]])
        sol, _, rank, _ = np.linalg.lstsq(K, rhs, rcond=None)
        if np.linalg.norm(K @ sol - rhs) > tol * scale * (1 + np.linalg.norm(rhs)):
            continue
        u[F] = sol[:nf]
        p = sol[nf:]
        if np.any(u < lo - tol * scale) or np.any(u > hi + tol * scale):
            continue
        g = Q @ u + q + A.T @ p
        if np.any(g[pattern < 0] < -tol * scale * 10) or np.any(g[pattern > 0] > tol * scale * 10):
            continue
        found.append((np.clip(u, lo, hi), p, rank < nf + m))
        if len(found) > 1 and (np.abs(found[-1][0] - found[0][0]).max() > 1e-8
                               or np.abs(found[-1][1] - found[0][1]).max() > 1e-8):
            break
    if not found:
        raise DiagnosticUnavailable("no KKT point found; problem may be infeasible")
    u, p, rank_def = found[0]
    degenerate = rank_def or any(
        np.abs(fu - u).max() > 1e-8 or np.abs(fp - p).max() > 1e-8 for fu, fp, _ in found[1:])
    return SaddleReference(u, p, eval_objective(prob, u), degenerate)
