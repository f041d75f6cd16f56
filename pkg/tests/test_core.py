import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vappal import (BlockProblem, BlockSpec, ContractViolation, IdentityQuadratic,
                    InvalidArgument, JacobianQuadratic, NewtonDiagonal, QuadraticCoupler,
                    ZeroCoupler, bregman_distance, build_quadratic_core_matrices,
                    check_underline_psd, core_value, grad_core, psd_proximal_weight)
from vappal.benchmarks import make_d1


def scalar_blocks(count, b=0.0, coupler=None):
    blocks = [BlockSpec(np.ones((1, 1))) for _ in range(count)]
    return BlockProblem(blocks, coupler or ZeroCoupler(count), [b])


class TestBregman:
    def test_identity(self):
        assert bregman_distance(IdentityQuadratic(1.0), [2.0], [0.0]) == 2.0

    def test_jacobian_scalar(self):
        core = JacobianQuadratic(scalar_blocks(1, b=0.7), theta=2.0, alpha=0.0)
        assert bregman_distance(core, [3.0], [1.0], anchor=[0.3]) == pytest.approx(4.0)

    def test_shape_mismatch(self):
        with pytest.raises(ContractViolation):
            bregman_distance(IdentityQuadratic(1.0), [1.0, 2.0], [1.0])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000))
    def test_sandwich_and_definition(self, seed):
        # beta/2 |u-v|^2 <= D(u,v) <= B/2 |u-v|^2, and D agrees with K(u)-K(v)-<grad K(v),u-v>
        rng = np.random.default_rng(seed)
        prob = make_d1(seed % 7)
        cores = [IdentityQuadratic(rng.uniform(0.5, 2.0)),
                 JacobianQuadratic(prob, theta=rng.uniform(0.5, 2), alpha=rng.uniform(0.1, 1)),
                 NewtonDiagonal(lambda x: 1.0 + x * x, m_floor=0.5, m_ceil=3.0)]
        u, v, anchor = rng.standard_normal((3, prob.n))
        for core in cores:
            beta, B = core.bounds()
            d = bregman_distance(core, u, v, anchor)
            dd = float((u - v) @ (u - v))
            assert beta / 2 * dd * (1 - 1e-12) <= d <= B / 2 * dd * (1 + 1e-12)
            direct = (core_value(core, u, anchor) - core_value(core, v, anchor)
                      - grad_core(core, v, anchor) @ (u - v))
            assert d == pytest.approx(direct, rel=1e-8, abs=1e-10)
            assert bregman_distance(core, u, u, anchor) == 0.0


class TestGradient:
    def test_identity(self):
        assert np.array_equal(grad_core(IdentityQuadratic(1.0), [1.0, 2.0]), [1.0, 2.0])

    def test_newton_diagonal(self):
        core = NewtonDiagonal(lambda x: np.array([2.0, 3.0]), m_floor=1e-8, m_ceil=10.0)
        assert np.array_equal(grad_core(core, [1.0, 1.0], anchor=np.zeros(2)), [2.0, 3.0])

    def test_jacobian_offset(self):
        # one block: K(u) = 0.5 (u - b)^2, so grad K(2) = 1 for b = 1
        core = JacobianQuadratic(scalar_blocks(1, b=1.0), theta=1.0, alpha=0.0)
        assert grad_core(core, [2.0], anchor=np.array([5.0])) == pytest.approx([1.0])

    def test_newton_clipping(self):
        core = NewtonDiagonal(lambda x: np.array([0.0, 1e9]), m_floor=1e-3, m_ceil=1e3)
        assert np.array_equal(core.diag(np.zeros(2)), [1e-3, 1e3])
        assert core.bounds() == (1e-3, 1e3)

    def test_newton_needs_anchor(self):
        with pytest.raises(ContractViolation):
            NewtonDiagonal(lambda x: x).diag(None)


class TestCoreMatrices:
    def test_scalar(self):
        prob = scalar_blocks(1)
        mats = build_quadratic_core_matrices(prob, JacobianQuadratic(prob, 1.0, 1.0), 1.0, 1.0, 0.0)
        assert (mats.H, mats.H_over, mats.H_under) == ([[2.0]], [[1.0]], [[1.0]])
        assert check_underline_psd(mats) == (True, 1.0)

    def test_zero_core(self):
        prob = BlockProblem([BlockSpec(np.array([[1.0, 2.0]]))], QuadraticCoupler(np.eye(2)), [0.0])
        core = JacobianQuadratic(prob, 0.0, 0.0, strict=False)
        mats = build_quadratic_core_matrices(prob, core, gamma=1.5, eps=1.0)
        AtA = np.array([[1.0, 2.0], [2.0, 4.0]])
        assert np.array_equal(mats.H, np.zeros((2, 2)))
        assert np.allclose(mats.H_under, -1.5 * AtA - np.eye(2))

    def test_zero_core_rejected_by_default(self):
        with pytest.raises(InvalidArgument):
            JacobianQuadratic(scalar_blocks(1), 0.0, 0.0)

    def test_two_identical_blocks(self):
        prob = scalar_blocks(2)
        mats = build_quadratic_core_matrices(prob, JacobianQuadratic(prob, 1.0, 0.0), 1.0, 1.0, 0.0)
        assert np.array_equal(mats.H, np.eye(2))
        assert np.array_equal(mats.H_under, [[0.0, -1.0], [-1.0, 0.0]])
        ok, lam = check_underline_psd(mats)
        assert not ok and lam == pytest.approx(-1.0)

    def test_zero_matrix_boundary(self):
        assert check_underline_psd(np.zeros((3, 3))) == (True, 0.0)

    def test_needs_jacobian_core(self):
        with pytest.raises(InvalidArgument):
            build_quadratic_core_matrices(scalar_blocks(1), IdentityQuadratic(), 1.0, 1.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_psd_weight_is_sufficient(self, seed):
        prob = make_d1(seed)
        alpha = psd_proximal_weight(prob, theta=1.0, gamma=1.0)
        mats = build_quadratic_core_matrices(prob, JacobianQuadratic(prob, 1.0, alpha), 1.0, 1.0)
        ok, lam = check_underline_psd(mats)
        assert ok and lam > 0
        # without the proximal term the matrix is indefinite on D1
        mats0 = build_quadratic_core_matrices(prob, JacobianQuadratic(prob, 1.0, 1e-9), 1.0, 1.0)
        assert not check_underline_psd(mats0)[0]


class TestIdentity:
    def test_per_block_scales(self):
        prob = make_d1(0)
        core = IdentityQuadratic.per_block(prob, [1.0, 2.0, 3.0])
        assert np.array_equal(core.diag(None, prob.n), [1, 1, 2, 2, 3, 3])
        assert core.bounds() == (1.0, 3.0)

    def test_nonpositive_scale(self):
        with pytest.raises(InvalidArgument):
            IdentityQuadratic(0.0)
