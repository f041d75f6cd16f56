import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vappal import (ConstraintSet, ContractViolation, DsvmInstance, FusedSvmInstance,
                    InvalidArgument, IterateState, LogisticInstance, build_dsvm, build_fused_svm,
                    build_logistic, dsvm_update, fused_svm_objective, fused_svm_split_objective,
                    fused_svm_u_update, fused_svm_z_update, inner_solve_oracle,
                    logistic_updates, reference_saddle, run, vapp_iterate)
from vappal.applications import LogisticCoupler, SquaredHingeCoupler, logistic_newton_diag
from vappal.benchmarks import classification_data, dsvm_toy


def state_of(prob, u, p):
    u = np.asarray(u, dtype=float)
    return IterateState(u, np.asarray(p, dtype=float), 0, np.asarray(prob.A @ u).ravel() - prob.b)


def l1_oracle(smooth, lam, start, lipschitz):
    """argmin smooth(v) + lam |v|_1 through v = a - b, (a, b) >= 0."""
    k = start.size

    def obj(x):
        a, b = x[:k], x[k:]
        val, g = smooth(a - b)
        return val + lam * x.sum(), np.concatenate([g + lam, -g + lam])

    x0 = np.concatenate([np.maximum(start, 0), np.maximum(-start, 0)])
    x = inner_solve_oracle(obj, ConstraintSet.nonnegative(2 * k), x0, tol=1e-11,
                           lipschitz=2 * lipschitz)
    return x[:k] - x[k:]


class TestFusedSvm:
    def test_shapes(self):
        inst = FusedSvmInstance(np.array([[1.0], [2.0]]), [1.0], 0.1, 0.1)
        prob, core = build_fused_svm(inst)
        assert prob.N == 3 and prob.m == 1 and prob.n == 3
        assert core.beta > 0

    def test_hinge_gradient_active(self):
        cpl = SquaredHingeCoupler(np.array([[1.0]]), np.array([1.0]))
        assert cpl.gradient(np.zeros(1)) == [-2.0]
        assert cpl.lipschitz == pytest.approx(2.0)

    def test_hinge_gradient_inactive(self):
        cpl = SquaredHingeCoupler(np.array([[1.0, -2.0]]), np.array([1.0, -1.0]))
        assert np.array_equal(cpl.gradient(np.array([1.5])), [0.0])

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_hinge_gradient_lipschitz(self, seed):
        rng = np.random.default_rng(seed)
        B, y = classification_data(seed, 4, 7)
        cpl = SquaredHingeCoupler(B, y)
        u, v = rng.standard_normal((2, 4)) * 2
        lhs = np.linalg.norm(cpl.gradient(u) - cpl.gradient(v))
        assert lhs <= cpl.lipschitz * np.linalg.norm(u - v) * (1 + 1e-12)

    def test_huge_l1_weight(self):
        inst = FusedSvmInstance(*classification_data(0, 3, 2), lam1=1e9, lam2=0.1)
        prob, _ = build_fused_svm(inst)
        st_ = state_of(prob, np.random.default_rng(0).standard_normal(5), [0.3, -0.2])
        assert all(fused_svm_u_update(j, st_, inst) == 0.0 for j in range(3))

    def test_zero_data(self):
        inst = FusedSvmInstance(np.zeros((3, 2)), [1.0, -1.0], 0.1, 0.1)
        prob, _ = build_fused_svm(inst)
        st_ = state_of(prob, np.zeros(5), np.zeros(2))
        assert all(fused_svm_u_update(j, st_, inst) == 0.0 for j in range(3))

    @pytest.mark.parametrize("seed", range(5))
    def test_u_update_against_oracle(self, seed):
        rng = np.random.default_rng(seed)
        inst = FusedSvmInstance(*classification_data(seed, 3, 2), lam1=0.1, lam2=0.1)
        prob, _ = build_fused_svm(inst)
        x = rng.standard_normal(5)
        p = rng.standard_normal(2)
        st_ = state_of(prob, x, p)
        u, z = inst.split(x)
        D, g, a1 = inst.D, inst.gamma, inst.alpha1
        # the hinge enters linearized at u^k; the coupling term stays exact in u_j
        hk = np.maximum(0.0, 1 - inst.labels * (inst.B.T @ u))
        gk = -2.0 / inst.m * inst.B @ (inst.labels * hk)
        L = g * 2 + a1
        for j in range(3):
            def smooth(v, j=j):
                w = u.copy()
                w[j] = v[0]
                r = D @ w - z
                val = gk[j] * v[0] + p @ r + g / 2 * r @ r + a1 / 2 * (v[0] - u[j]) ** 2
                grad = gk[j] + D[:, j] @ (p + g * r) + a1 * (v[0] - u[j])
                return val, np.array([grad])
            want = l1_oracle(smooth, inst.lam1, u[[j]], L)
            assert abs(fused_svm_u_update(j, st_, inst) - want[0]) <= 1e-6

    def test_huge_fused_weight(self):
        inst = FusedSvmInstance(*classification_data(1, 4, 3), lam1=0.1, lam2=1e9)
        prob, _ = build_fused_svm(inst)
        st_ = state_of(prob, np.random.default_rng(1).standard_normal(7), np.ones(3))
        assert np.array_equal(fused_svm_z_update(st_, inst), np.zeros(3))

    def test_z_reduces_to_shrunk_differences(self):
        inst = FusedSvmInstance(*classification_data(2, 4, 3), lam1=0.1, lam2=1e-3)
        u = np.array([10.0, -5.0, 20.0, 0.0])
        Du = inst.D @ u
        prob, _ = build_fused_svm(inst)
        st_ = state_of(prob, np.concatenate([u, Du]), np.zeros(3))
        s = inst.gamma + inst.alpha2
        want = Du - np.sign(Du) * inst.lam2 / s
        assert np.allclose(fused_svm_z_update(st_, inst), want, rtol=0, atol=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_closed_forms_match_engine(self, seed):
        rng = np.random.default_rng(seed)
        inst = FusedSvmInstance(*classification_data(seed, 5, 8), lam1=0.05, lam2=0.05)
        prob, core = build_fused_svm(inst)
        st_ = state_of(prob, rng.standard_normal(9), rng.standard_normal(4))
        new = vapp_iterate(st_, prob, core, inst.params())
        direct = [fused_svm_u_update(j, st_, inst) for j in range(5)]
        assert np.allclose(new.u[:5], direct, rtol=0, atol=1e-12)
        assert np.allclose(new.u[5:], fused_svm_z_update(st_, inst), rtol=0, atol=1e-12)

    def test_objectives_agree_when_split_is_exact(self):
        inst = FusedSvmInstance(*classification_data(0, 4, 6), lam1=0.1, lam2=0.2)
        u = np.array([0.5, -1.0, 0.0, 2.0])
        assert fused_svm_objective(inst, u) == pytest.approx(
            fused_svm_split_objective(inst, u, inst.D @ u), rel=1e-15)

    def test_invalid(self):
        B, y = classification_data(0, 3, 4)
        with pytest.raises(InvalidArgument):
            FusedSvmInstance(B, y, 0.0, 0.1)
        with pytest.raises(InvalidArgument):
            FusedSvmInstance(B, np.array([1.0, 0.0, 1.0, 1.0]), 0.1, 0.1)
        with pytest.raises(ContractViolation):
            FusedSvmInstance(B, y[:3], 0.1, 0.1)


class TestLogistic:
    def instance(self, seed=0, n=3, m=5, **kw):
        return LogisticInstance(*classification_data(seed, n, m, noise=1.0), lam=0.1, **kw)

    def test_newton_diag_scalar(self):
        inst = LogisticInstance(np.ones((1, 1)), [1.0], lam=0.1)
        assert logistic_newton_diag(inst, np.zeros(1)) == [0.25]

    @pytest.mark.parametrize("seed", range(50))
    def test_gradient_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        y = np.where(rng.standard_normal(6) > 0, 1.0, -1.0)
        cpl = LogisticCoupler(y, n_u=2)
        x = rng.standard_normal(8) * 3
        h = 1e-6
        fd = np.array([(cpl.value(x + h * e) - cpl.value(x - h * e)) / (2 * h)
                       for e in np.eye(8)])
        assert np.abs(fd - cpl.gradient(x)).max() <= 1e-5

    def test_no_overflow(self):
        cpl = LogisticCoupler(np.array([1.0, -1.0]), n_u=0)
        x = np.array([-1e4, -1e4])
        assert np.isfinite(cpl.value(x)) and np.all(np.isfinite(cpl.gradient(x)))

    def test_flat_linear_term(self):
        inst = self.instance()
        prob, _ = build_logistic(inst)
        u = np.array([0.3, -0.2, 0.05])
        z = inst.B.T @ u
        st_ = state_of(prob, np.concatenate([u, z]), np.zeros(inst.m))
        u_new, z_new = logistic_updates(st_, inst)
        b = inst.labels
        M = np.clip(logistic_newton_diag(inst, z), inst.m_floor, 1.0)
        drift = inst.eps * b / (1 + np.exp(b * z)) / (M * inst.m)
        assert np.allclose(z_new, z + drift, rtol=1e-14, atol=0)
        # s = 0: pure l1 decay
        assert np.array_equal(u_new, np.sign(u) * np.maximum(np.abs(u) - inst.eps * inst.lam, 0))

    @pytest.mark.parametrize("seed", range(3))
    def test_closed_forms_match_engine(self, seed):
        rng = np.random.default_rng(seed)
        inst = self.instance(seed, eps=0.7, gamma=0.9)
        prob, core = build_logistic(inst)
        st_ = state_of(prob, rng.standard_normal(8), rng.standard_normal(5))
        new = vapp_iterate(st_, prob, core, inst.params())
        u_new, z_new = logistic_updates(st_, inst)
        assert np.allclose(new.u[:3], u_new, rtol=1e-12, atol=1e-12)
        assert np.allclose(new.u[3:], z_new, rtol=1e-12, atol=1e-12)

    def test_floor_keeps_weights_positive(self):
        inst = self.instance()
        d = np.clip(logistic_newton_diag(inst, np.full(inst.m, 2000.0)), inst.m_floor, 1.0)
        assert np.all(d == inst.m_floor)


class TestDsvm:
    def test_scalar_example(self):
        inst = DsvmInstance([[1.0]], [1.0], [1.0], c=1.0, eps=0.1, gamma=1.0, rho=2.0)
        prob, _ = build_dsvm(inst)
        u, p = dsvm_update(state_of(prob, [0.5], [0.0]), inst)
        assert u == pytest.approx([0.5]) and p == pytest.approx([1.0])

    def test_lower_bound_fixed(self):
        inst = DsvmInstance(np.eye(2), [0.0, 0.0], [1.0, -1.0])
        prob, _ = build_dsvm(inst)
        u, p = dsvm_update(state_of(prob, [0.0, 0.0], [0.0]), inst)
        assert np.array_equal(u, [0.0, 0.0]) and p == [0.0]

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_engine(self, seed):
        rng = np.random.default_rng(seed)
        inst = dsvm_toy(seed, n=5)
        prob, core = build_dsvm(inst)
        st_ = state_of(prob, rng.uniform(0, 1, 5), rng.standard_normal(1))
        new = vapp_iterate(st_, prob, core, inst.params())
        u, p = dsvm_update(st_, inst)
        assert np.allclose(new.u, u, rtol=0, atol=1e-14) and np.allclose(new.p, p, atol=1e-14)

    def test_toy_reaches_active_set_solution(self):
        inst = dsvm_toy(0)
        prob, core = build_dsvm(inst)
        ref = reference_saddle(prob)
        params = inst.params(max_iter=10_000, tol_primal=0.0, tol_change=0.0)
        state, trace = run(prob, core, params, keep_iterates=True, timing=False)
        assert np.abs(state.u - ref.u_star).max() <= 1e-6
        U = trace.U()
        assert np.all(U >= 0.0) and np.all(U <= inst.c)

    def test_invalid(self):
        with pytest.raises(InvalidArgument):
            DsvmInstance([[1.0, 0.5], [0.0, 1.0]], [1, 1], [1, -1])
        with pytest.raises(InvalidArgument):
            DsvmInstance(-np.eye(2), [1, 1], [1, -1])
        with pytest.raises(InvalidArgument):
            DsvmInstance(np.eye(2), [1, 1], [1, -1], c=0.0)
        with pytest.raises(ContractViolation):
            DsvmInstance(np.eye(2), [1, 1, 1], [1, -1])
