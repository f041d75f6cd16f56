import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vappal import (BlockProblem, BlockSpec, DiagnosticUnavailable, ErgodicPoint,
                    IdentityQuadratic, InvalidArgument, IterateState, L1Term, QuadraticCoupler,
                    SaddleReference, SolverParams, Trace, TraceRecord, ZeroCoupler, ZeroTerm,
                    block_stationarity, build_dsvm, default_parameters, ergodic_average,
                    ergodic_bound, ergodic_path, increment_monotonicity_check,
                    inner_solve_oracle, merit_lambda, nonergodic_bound_check, nonergodic_nu,
                    rate_fit, reference_saddle, run, vi_gap)
from vappal.benchmarks import dsvm_toy, make_d1


def scalar(b=0.0, coupler=None, term=None):
    return BlockProblem([BlockSpec(np.ones((1, 1)), term or ZeroTerm())],
                        coupler or ZeroCoupler(1), [b])


def records(du, dp):
    return Trace(records=[TraceRecord(k + 1, 0.0, 0.0, a, b)
                          for k, (a, b) in enumerate(zip(du, dp))])


class TestMerit:
    def test_zero_at_saddle(self):
        prob = make_d1(0)
        ref = reference_saddle(prob)
        state = IterateState(ref.u_star, ref.p_star, 0, prob.A @ ref.u_star - prob.b)
        params = default_parameters(prob, IdentityQuadratic())
        assert merit_lambda(IdentityQuadratic(), params, 1.0, state, ref) == pytest.approx(
            0.0, abs=1e-20)

    def test_scalar(self):
        ref = SaddleReference(np.zeros(1), np.zeros(1), 0.0)
        state = IterateState(np.ones(1), np.zeros(1), 0, np.ones(1))
        params = SolverParams(eps=0.5, gamma=1.0, rho=1.0)
        assert merit_lambda(IdentityQuadratic(1.0), params, 1.0, state, ref) == 0.25

    def test_needs_reference(self):
        state = IterateState(np.ones(1), np.zeros(1), 0, np.ones(1))
        with pytest.raises(DiagnosticUnavailable):
            merit_lambda(IdentityQuadratic(), SolverParams(eps=1.0), 1.0, state, None)


class TestErgodic:
    def test_identical_iterates(self):
        prob = scalar()
        U = [[0.0], [2.0], [2.0]]
        P = [[-2.0], [-2.0]]
        pt = ergodic_average(prob, U, P, [1.0, 1.0], 1.0, 1)
        assert pt.u_bar == [2.0] and pt.p_bar == [0.0]

    def test_midpoint(self):
        prob = BlockProblem([BlockSpec(np.eye(2))], ZeroCoupler(2), [0.0, 0.0])
        U = [[9.0, 9.0], [0.0, 0.0], [2.0, 2.0]]
        P = [[0.0, 0.0], [0.0, 0.0]]
        pt = ergodic_average(prob, U, P, [1.0, 1.0], 1.0, 1)
        assert np.array_equal(pt.u_bar, [1.0, 1.0]) and np.array_equal(pt.p_bar, [1.0, 1.0])

    def test_weighted(self):
        pt = ergodic_average(scalar(), [[5.0], [0.0], [3.0]], [[0.0], [0.0]], [1.0, 0.5], 1.0, 1)
        assert pt.u_bar == pytest.approx([1.0]) and pt.p_bar == pytest.approx([1.0])
        assert pt.sigma == 1.5

    def test_horizon_too_long(self):
        with pytest.raises(InvalidArgument):
            ergodic_average(scalar(), [[0.0], [1.0]], [[0.0]], [1.0, 1.0], 1.0, 1)

    def test_path_matches_average(self):
        prob = make_d1(2)
        params = default_parameters(prob, IdentityQuadratic(), max_iter=40, tol_primal=0)
        _, tr = run(prob, IdentityQuadratic(), params, keep_iterates=True, timing=False)
        w = np.linspace(1.0, 0.5, len(tr) + 1)
        path = ergodic_path(prob, tr.U(), tr.P(), w, params.gamma)
        for t in (0, 7, len(path) - 1):
            pt = ergodic_average(prob, tr.U(), tr.P(), w, params.gamma, t)
            assert np.allclose(path[t].u_bar, pt.u_bar, atol=1e-13)
            assert np.allclose(path[t].p_bar, pt.p_bar, atol=1e-13)

    def test_bound_formula(self):
        # (2/(2*0.5)*1 + 4/(2*2)) / (3*0.5) = 2
        assert ergodic_bound(2, 0.5, 2.0, 0.5, 2.0, [1.0], [0.0], [2.0], [0.0]) == 2.0


class TestViGap:
    def test_identical(self):
        prob = make_d1(0)
        w = (np.arange(6.0), np.ones(2))
        assert vi_gap(prob, w, w) == 0.0

    def test_l1_scalar(self):
        prob = scalar(term=L1Term(1.0))
        assert vi_gap(prob, (np.ones(1), np.zeros(1)), (np.zeros(1), np.zeros(1))) == 1.0

    def test_accepts_ergodic_point(self):
        prob = scalar(term=L1Term(1.0))
        pt = ErgodicPoint(np.ones(1), np.zeros(1), 0, 1.0)
        assert vi_gap(prob, pt, (np.zeros(1), np.zeros(1))) == 1.0

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_nonnegative_against_saddle(self, seed):
        # gap(w, w*) = L(u, p*) - L(u*, p*) >= 0 for every u in U and any p
        prob = make_d1(seed % 5)
        ref = reference_saddle(prob)
        rng = np.random.default_rng(seed)
        u = prob.project(3 * rng.standard_normal(prob.n))
        p = rng.standard_normal(prob.m)
        assert vi_gap(prob, (u, p), (ref.u_star, ref.p_star)) >= -1e-10


class TestNonergodic:
    def test_nu_formula(self):
        nu = nonergodic_nu(beta=1.0, eps=0.5, B_G=0.0, gamma=1.0, lam_max=1.0, rho=1.0, delta=1.0)
        assert nu == 0.25
        assert nonergodic_nu(1.0, 2.0, 0.0, 1.0, 1.0, 1.0, 1.0) < 0

    def test_bound_decreasing_and_stationary(self):
        tr = records([0.0] * 30, [0.0] * 30)
        rep = nonergodic_bound_check(tr, lambda0=1.0, nu=0.1)
        assert rep.passed and rep.details["checked"] == 30
        t = np.arange(30)
        assert np.all(np.diff(1.0 / ((t + 1) * 0.1)) < 0)

    def test_violation_found(self):
        rep = nonergodic_bound_check(records([1.0] * 5, [0.0] * 5), lambda0=1.0, nu=0.5)
        assert rep.status == "fail" and rep.details["first_violation"] == 2

    def test_outside_regime(self):
        rep = nonergodic_bound_check(records([1.0], [1.0]), 1.0, -0.1)
        assert rep.status == "unavailable"


class TestIncrements:
    def test_constant_iterates(self):
        tr = Trace(records=[TraceRecord(k, 0.0, 0.0, 0.0, 0.0, du_Hbar_sq=0.0)
                            for k in range(1, 11)])
        assert increment_monotonicity_check(tr, 1.0, True).passed

    def test_gated(self):
        prob = make_d1(0)
        params = default_parameters(prob, IdentityQuadratic(), rho=3.0, max_iter=5)
        _, tr = run(prob, IdentityQuadratic(), params, override=True)
        rep = increment_monotonicity_check(tr, params.rho, tr.meta["report"])
        assert rep.status == "unavailable" and rep.details["reason"] == "preconditions unmet"

    def test_needs_quadratic_core(self):
        tr = records([1.0, 0.5], [0.0, 0.0])
        assert increment_monotonicity_check(tr, 1.0, True).status == "unavailable"

    def test_detects_increase(self):
        tr = Trace(records=[TraceRecord(k, 0.0, 0.0, 0.0, 0.0, du_Hbar_sq=v)
                            for k, v in enumerate([1.0, 0.5, 0.6], start=1)])
        rep = increment_monotonicity_check(tr, 1.0, True)
        assert rep.status == "fail" and rep.details["max_increase"] == pytest.approx(0.1)


class TestRateFit:
    def test_one_over_k(self):
        k = np.arange(1, 2001)
        fit = rate_fit(1.0 / k)
        assert abs(fit.slope + 1) <= 0.01 and not fit.o_one_over_t

    def test_one_over_k_squared(self):
        k = np.arange(1, 2001)
        fit = rate_fit(1.0 / k ** 2)
        assert fit.slope == pytest.approx(-2.0, abs=1e-9) and fit.o_one_over_t

    def test_window(self):
        k = np.arange(1, 101, dtype=float)
        a = np.where(k <= 10, 1.0, 1.0 / k ** 3)
        assert rate_fit(a, window=(11, 100)).slope == pytest.approx(-3.0, abs=1e-9)

    def test_too_short(self):
        with pytest.raises(InvalidArgument):
            rate_fit(np.ones(10))

    def test_nonpositive(self):
        with pytest.raises(InvalidArgument):
            rate_fit(np.r_[np.ones(30), 0.0])


class TestReferenceSaddle:
    def test_scalar(self):
        ref = reference_saddle(scalar(b=1.0, coupler=QuadraticCoupler([[1.0]])))
        assert ref.u_star == pytest.approx([1.0]) and ref.p_star == pytest.approx([-1.0])

    def test_symmetric(self):
        prob = BlockProblem([BlockSpec(np.ones((1, 1))), BlockSpec(np.ones((1, 1)))],
                            QuadraticCoupler(np.eye(2)), [2.0])
        ref = reference_saddle(prob)
        assert ref.u_star == pytest.approx([1.0, 1.0]) and ref.p_star == pytest.approx([-1.0])
        assert not ref.degenerate

    @pytest.mark.parametrize("seed", range(3))
    def test_dsvm_against_oracle(self, seed):
        # u* minimizes the Lagrangian at p* over the box (Q is positive definite)
        prob, _ = build_dsvm(dsvm_toy(seed))
        ref = reference_saddle(prob)
        Q, q, y = prob.coupler.hessian(None), prob.coupler.q, np.asarray(prob.A)[0]
        lin = q + ref.p_star[0] * y
        u = inner_solve_oracle(lambda u: (0.5 * u @ Q @ u + lin @ u, Q @ u + lin),
                               prob.blocks[0].cset, np.zeros(prob.n), tol=1e-12,
                               lipschitz=np.linalg.eigvalsh(Q)[-1])
        assert np.abs(u - ref.u_star).max() <= 1e-9
        assert abs(y @ ref.u_star) <= 1e-12

    @pytest.mark.parametrize("seed", range(3))
    def test_d1_against_cvxpy(self, seed):
        cp = pytest.importorskip("cvxpy")
        prob = make_d1(seed)
        ref = reference_saddle(prob)
        x = cp.Variable(prob.n)
        Q = prob.coupler.hessian(None)
        cons = [np.asarray(prob.A) @ x == prob.b]
        lo, hi = prob.lower, prob.upper
        cons += [x[j] >= lo[j] for j in range(prob.n) if np.isfinite(lo[j])]
        cons += [x[j] <= hi[j] for j in range(prob.n) if np.isfinite(hi[j])]
        val = cp.Problem(cp.Minimize(0.5 * cp.quad_form(x, cp.psd_wrap(Q)) + prob.coupler.q @ x),
                         cons).solve()
        assert ref.objective_star == pytest.approx(val, abs=1e-6)
        assert np.abs(x.value - ref.u_star).max() <= 1e-4

    def test_stationarity_zero_at_saddle(self):
        prob = make_d1(1)
        ref = reference_saddle(prob)
        assert max(block_stationarity(prob, ref.u_star, ref.p_star)) <= 1e-10

    def test_non_qp(self):
        with pytest.raises(DiagnosticUnavailable):
            reference_saddle(scalar(b=1.0, term=L1Term(1.0)))

    def test_size_limit(self):
        prob = BlockProblem([BlockSpec(np.ones((1, 13)))], QuadraticCoupler(np.eye(13)), [1.0])
        with pytest.raises(DiagnosticUnavailable):
            reference_saddle(prob)


def test_trace_column_missing_values():
    tr = Trace(records=[TraceRecord(1, 1.0, 0.0, 0.0, 0.0), TraceRecord(2, 2.0, 0.0, 0.0, 0.0,
                                                                       lambda_merit=3.0)])
    col = tr.column("lambda_merit")
    assert np.isnan(col[0]) and col[1] == 3.0
