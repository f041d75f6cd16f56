"""The VAPP-AL iteration.

One iteration solves, for the core ``K^k`` anchored at ``u^k``::

    u^{k+1} = argmin_{u in U} <grad G(u^k), u> + J(u) + <p^k + gamma (A u^k - b), A u>
                              + (1/eps) [K^k(u) - <grad K^k(u^k), u>]
    p^{k+1} = p^k + rho (A u^{k+1} - b)

The primal problem splits into one subproblem per block because every core
is block separable.
"""

import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .core import (JacobianQuadratic, build_quadratic_core_matrices,
                   check_underline_psd)
from .diagnostics import Trace, TraceRecord, merit_lambda
from .errors import (InvalidArgument, NumericalFailure, ParameterRejected,
                     SizeLimitExceeded, UnsupportedBlock,
                     UnsupportedCombination)
from .problem import L1Term, ZeroTerm, eval_objective, spectral_norm_sq

__all__ = ["SolverParams", "IterateState", "ParamReport", "WeightSequence",
           "validate_parameters", "default_parameters", "solve_block_subproblem",
           "vapp_iterate", "run", "weight_sequence", "initial_state"]

JACOBIAN = "jacobian"
GAUSS_SEIDEL = "gauss-seidel"


@dataclass(frozen=True)
class SolverParams:
    """Step sizes, schedule and stopping rule.

    ``eps`` scales the auxiliary (core) term, ``gamma`` is the augmentation
    weight, ``rho`` the dual step and ``delta`` in (0, 1] the slack in the
    bound ``rho < (1 + delta) gamma``.
    """

    eps: float
    gamma: float = 1.0
    rho: float = 1.0
    delta: float = 1.0
    schedule: str = JACOBIAN
    tol_primal: float = 1e-6
    tol_change: float = 1e-6
    max_iter: int = 100_000
    worker_count: int = 1

    def __post_init__(self):
        if not self.eps > 0 or not self.gamma > 0 or not self.rho > 0:
            raise InvalidArgument("eps, gamma and rho must be positive")
        if not 0 < self.delta <= 1:
            raise InvalidArgument("delta must lie in (0, 1]")
        if self.schedule not in (JACOBIAN, GAUSS_SEIDEL):
            raise InvalidArgument(f"unknown schedule {self.schedule!r}")
        if self.tol_primal < 0 or self.tol_change < 0:
            raise InvalidArgument("tolerances must be nonnegative")
        if self.max_iter < 1 or self.worker_count < 1:
            raise InvalidArgument("max_iter and worker_count must be at least 1")

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass(frozen=True, eq=False)
class IterateState:
    u: np.ndarray
    p: np.ndarray
    k: int
    residual: np.ndarray

    def __eq__(self, other):
        return (isinstance(other, IterateState) and self.k == other.k
                and np.array_equal(self.u, other.u) and np.array_equal(self.p, other.p)
                and np.array_equal(self.residual, other.residual))


@dataclass
class ParamReport:
    regime: str
    step_bound: bool
    quadratic_core: bool
    beta: float
    B: float
    B_G: float
    lam_max_AtA: float
    eps_ceiling: float
    rho_ceiling: float
    lam_min_H_under: float = None
    notes: tuple = ()

    @property
    def ok(self):
        return self.regime != "neither"

    @property
    def increments_ok(self):
        return self.quadratic_core

    def to_dict(self):
        d = asdict(self)
        d["notes"] = list(self.notes)
        return d

    def summary(self):
        lines = [f"regime: {self.regime}",
                 f"step_bound (eps < beta/(B_G + gamma*lmax), rho < (1+delta)gamma): "
                 f"{'pass' if self.step_bound else 'fail'}",
                 "quadratic_core (H_under >= 0, rho <= (1+delta)gamma): "
                 + ("n/a" if self.lam_min_H_under is None
                    else ("pass" if self.quadratic_core else "fail")),
                 f"beta = {self.beta:.6g}, B = {self.B:.6g}, B_G = {self.B_G:.6g}, "
                 f"lambda_max(A'A) = {self.lam_max_AtA:.6g}",
                 f"eps ceiling = {self.eps_ceiling:.6g}, rho ceiling = {self.rho_ceiling:.6g}"]
        if self.lam_min_H_under is not None:
            lines.append(f"lambda_min(H_under) = {self.lam_min_H_under:.6g}")
        lines.extend(self.notes)
        return "\n".join(lines)


@dataclass(frozen=True)
class WeightSequence:
    delta: float
    ratio: float
    values: np.ndarray

    @property
    def sigma(self):
        return np.cumsum(self.values)


def weight_sequence(delta, ratio, t):
    """``m^0 = 1``, ``m^{k+1} = max(delta, ratio * m^k)`` for k < t.

    Used by diagnostics only; iterates never depend on these weights.
    """
    if not 0 < delta <= 1:
        raise InvalidArgument("delta must lie in (0, 1]")
    if not 0 < ratio <= 1:
        raise InvalidArgument("ratio must lie in (0, 1]")
    m = np.empty(t + 1)
    m[0] = 1.0
    for k in range(t):
        m[k + 1] = max(delta, ratio * m[k])
    return WeightSequence(float(delta), float(ratio), m)


def default_weight_ratio(core_fn):
    beta, B = core_fn.bounds()
    return 1.0 if beta >= B else beta / B


def validate_parameters(prob, core_fn, params):
    """Report which convergence regime ``params`` fall into.

    Step-bound regime: ``0 < eps < beta / (B_G + gamma lambda_max(A'A))`` and
    ``0 < rho < (1 + delta) gamma``.  Quadratic-core regime (Jacobian
    quadratic cores only): ``H_under >= 0`` and ``rho <= (1 + delta) gamma``.
    """
    beta, B = core_fn.bounds()
    B_G = prob.coupler.lipschitz
    lam = spectral_norm_sq(prob.A)
    eps_ceiling = beta / (B_G + params.gamma * lam) if B_G + params.gamma * lam > 0 else np.inf
    rho_ceiling = (1 + params.delta) * params.gamma
    step_ok = params.eps < eps_ceiling and params.rho < rho_ceiling
    qc_ok, lam_min, notes = False, None, []
    if isinstance(core_fn, JacobianQuadratic):
        try:
            mats = build_quadratic_core_matrices(prob, core_fn, params.gamma, params.eps, B_G)
            psd, lam_min = check_underline_psd(mats)
            qc_ok = psd and params.rho <= rho_ceiling
        except SizeLimitExceeded as exc:
            notes.append(f"H_under check skipped: {exc}")
    if params.schedule == GAUSS_SEIDEL:
        notes.append("Gauss-Seidel schedule is experimental: the regimes above are "
                     "proved for the Jacobian form only")
    regime = "step-bound" if step_ok else ("quadratic-core" if qc_ok else "neither")
    return ParamReport(regime, bool(step_ok), bool(qc_ok), float(beta), float(B), float(B_G),
                       float(lam), float(eps_ceiling), float(rho_ceiling), lam_min, tuple(notes))


def default_parameters(prob, core_fn, gamma=1.0, **overrides):
    """``eps = 0.9 beta / (B_G + gamma lambda_max(A'A))``, ``rho = gamma``, ``delta = 1``."""
    beta, _ = core_fn.bounds()
    if beta is None or not beta > 0:
        raise InvalidArgument("core has no positive strong-convexity bound; "
                              "pass parameters explicitly")
    denom = prob.coupler.lipschitz + gamma * spectral_norm_sq(prob.A)
    eps = 0.9 * beta / denom if denom > 0 else 1.0
    kw = dict(eps=eps, gamma=gamma, rho=gamma, delta=1.0)
    kw.update(overrides)
    return SolverParams(**kw)


def initial_state(prob, u0=None, p0=None):
    u = prob.initial_point() if u0 is None else prob.project(prob.check_dim(u0, "u0"))
    p = np.zeros(prob.m) if p0 is None else np.asarray(p0, dtype=float).reshape(prob.m).copy()
    return IterateState(u, p, 0, np.asarray(prob.A @ u).ravel() - prob.b)


def _block_update(i, prob, core_fn, params, anchor, u_hat, grad_hat, y_hat):
    blk = prob.blocks[i]
    sl = prob.slices[i]
    g = grad_hat[sl] + np.asarray(blk.A.T @ y_hat).ravel()
    W = core_fn.block_weight(i, sl, anchor)
    W = W / params.eps
    center = anchor[sl]
    linear = g - (W * center if W.ndim == 1 else W @ center)
    try:
        return blk.solve(linear, W)
    except UnsupportedCombination as exc:
        raise UnsupportedBlock(
            f"block {i}: no closed form and no registered solver ({exc})") from exc


def solve_block_subproblem(i, state, prob, core_fn, params, u_hat=None):
    """Minimize the block-``i`` part of the auxiliary problem.

    ``u_hat`` is the point where the gradient of ``G`` and the constraint
    residual are linearized: ``u^k`` for the Jacobian schedule, the partly
    updated iterate for Gauss-Seidel.  The proximal center is always ``u^k``.
    """
    u_hat = state.u if u_hat is None else u_hat
    grad = prob.coupler.gradient(u_hat)
    r = state.residual if u_hat is state.u else np.asarray(prob.A @ u_hat).ravel() - prob.b
    y = state.p + params.gamma * r
    return _block_update(i, prob, core_fn, params, state.u, u_hat, grad, y)


class _Plan:
    """Per-problem data reused across iterations."""

    def __init__(self, prob):
        self.prob = prob
        self.elementwise = all(
            blk.solver is None and type(blk.term) in (ZeroTerm, L1Term) for blk in prob.blocks)
        if self.elementwise:
            self.l1 = np.concatenate([blk.term.l1_weights(blk.size) for blk in prob.blocks])
            self.has_l1 = bool(np.any(self.l1 > 0))


def _jacobian_primal(state, prob, core_fn, params, plan, pool):
    u = state.u
    grad = prob.coupler.gradient(u)
    y = state.p + params.gamma * state.residual
    if plan.elementwise:
        diag = core_fn.diag(u, prob.n)
        if diag is not None:
            w = diag / params.eps
            v = u - (grad + np.asarray(prob.A.T @ y).ravel()) / w
            if plan.has_l1:
                # adding 0.0 turns the -0.0 produced by sign() into +0.0
                v = np.sign(v) * np.maximum(np.abs(v) - plan.l1 / w, 0.0) + 0.0
            return np.minimum(np.maximum(v, prob.lower), prob.upper)
    out = np.empty(prob.n)
    idx = range(prob.N)
    solve = lambda i: _block_update(i, prob, core_fn, params, u, u, grad, y)  # noqa: E731
    results = pool.map(solve, idx) if pool is not None else map(solve, idx)
    # merge in block-index order so the result is independent of worker count
    for i, ui in zip(idx, results):
        out[prob.slices[i]] = ui
    return out


def _gauss_seidel_primal(state, prob, core_fn, params):
    u_hat = state.u.copy()
    for i in range(prob.N):
        grad = prob.coupler.gradient(u_hat)
        y = state.p + params.gamma * (np.asarray(prob.A @ u_hat).ravel() - prob.b)
        u_hat[prob.slices[i]] = _block_update(i, prob, core_fn, params, state.u, u_hat, grad, y)
    return u_hat


def vapp_iterate(state, prob, core_fn, params, plan=None, pool=None):
    """One primal sweep followed by the multiplier update."""
    plan = plan or _Plan(prob)
    if params.schedule == JACOBIAN:
        u_new = _jacobian_primal(state, prob, core_fn, params, plan, pool)
    else:
        u_new = _gauss_seidel_primal(state, prob, core_fn, params)
    r_new = np.asarray(prob.A @ u_new).ravel() - prob.b
    p_new = state.p + params.rho * r_new
    return IterateState(u_new, p_new, state.k + 1, r_new)


def run(prob, core_fn, params, callbacks=(), reference=None, override=False,
        u0=None, p0=None, keep_iterates=False, timing=True):
    """Iterate until both stopping tests pass or ``max_iter`` is reached.

    Parameters
    ----------
    prob : BlockProblem
    core_fn : core function object
    params : SolverParams
    callbacks : iterable of callables
        Each receives every :class:`TraceRecord` as it is produced.
    reference : SaddleReference, optional
        Enables the merit value in the trace.
    override : bool
        Allow parameters outside every convergence regime.
    keep_iterates : bool
        Store all ``u^k`` and ``p^k`` on the trace (needed for ergodic checks).
    timing : bool
        Record wall-clock milliseconds; disable for byte-reproducible output.

    Returns
    -------
    state : IterateState
    trace : Trace
        ``trace.reason`` is ``"converged"`` or ``"iteration cap"``.

    Raises
    ------
    ParameterRejected
        Regime "neither" without `override`.
    NumericalFailure
        Non-finite iterates; carries the iteration index.
    """
    report = validate_parameters(prob, core_fn, params)
    if not report.ok and not override:
        raise ParameterRejected(
            "parameters satisfy neither the step-size bounds nor the "
            "quadratic-core (H_under >= 0) condition; pass override=True to run anyway",
            report)
    if params.schedule == GAUSS_SEIDEL:
        warnings.warn("Gauss-Seidel schedule is experimental; convergence checks "
                      "apply to the Jacobian schedule only", stacklevel=2)

    state = initial_state(prob, u0, p0)
    plan = _Plan(prob)
    H_over = None
    if isinstance(core_fn, JacobianQuadratic):
        try:
            H_over = build_quadratic_core_matrices(prob, core_fn, params.gamma, params.eps).H_over
        except SizeLimitExceeded:
            H_over = None
    ratio = default_weight_ratio(core_fn)
    m_k = 1.0
    trace = Trace(meta={"report": report, "weight_ratio": ratio, "weights": [1.0]})
    if reference is not None:
        trace.lambda0 = merit_lambda(core_fn, params, 1.0, state, reference)
    if keep_iterates:
        trace.iterates_u = [state.u.copy()]
        trace.iterates_p = [state.p.copy()]
    beta_seen, B_seen = core_fn.iteration_bounds(state.u)

    pool = None
    if params.worker_count > 1 and params.schedule == JACOBIAN:
        pool = ThreadPoolExecutor(max_workers=params.worker_count)
    start = time.perf_counter()
    try:
        trace.reason = "iteration cap"
        for _ in range(params.max_iter):
            new = vapp_iterate(state, prob, core_fn, params, plan, pool)
            if not (np.all(np.isfinite(new.u)) and np.all(np.isfinite(new.p))):
                raise NumericalFailure(f"non-finite iterate at iteration {new.k}", new.k)
            du = new.u - state.u
            dp = new.p - state.p
            m_k = max(params.delta, ratio * m_k)
            if core_fn.varying:
                bk, Bk = core_fn.iteration_bounds(new.u)
                beta_seen, B_seen = min(beta_seen, bk), max(B_seen, Bk)
            rec = TraceRecord(
                k=new.k,
                objective=eval_objective(prob, new.u),
                primal_residual_norm=float(np.linalg.norm(new.residual)),
                du_norm=float(np.linalg.norm(du)),
                dp_norm=float(np.linalg.norm(dp)),
                du_Hbar_sq=None if H_over is None else float(du @ H_over @ du),
                lambda_merit=None if reference is None
                else merit_lambda(core_fn, params, m_k, new, reference),
                wall_ms=(time.perf_counter() - start) * 1e3 if timing else None,
            )
            trace.records.append(rec)
            trace.meta["weights"].append(m_k)
            if keep_iterates:
                trace.iterates_u.append(new.u.copy())
                trace.iterates_p.append(new.p.copy())
            for cb in callbacks:
                cb(rec)
            state = new
            if (np.max(np.abs(new.residual), initial=0.0) <= params.tol_primal
                    and np.max(np.abs(du), initial=0.0) <= params.tol_change):
                trace.reason = "converged"
                break
    finally:
        if pool is not None:
            pool.shutdown()
    trace.meta["beta_seen"] = beta_seen
    trace.meta["B_seen"] = B_seen
    return state, trace
