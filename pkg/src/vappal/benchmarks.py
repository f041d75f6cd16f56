"""Small seeded problems used by the ``bench`` command, the tests and the demos."""

import numpy as np

from .applications import DsvmInstance, FusedSvmInstance
from .errors import InvalidArgument
from .problem import BlockProblem, BlockSpec, ConstraintSet, QuadraticCoupler

__all__ = ["block_qp_data", "qp_from_data", "make_block_qp", "make_d1", "dsvm_toy",
           "fused_svm_synthetic", "classification_data"]


def block_qp_data(seed, sizes=(2, 2, 2), m=2, shift=0.5):
    """Data of a strongly convex block QP ``min 0.5 u'Qu + q'u  s.t. Au = b, u in U``.

    Block ``i`` cycles through all-space, the box ``[-1, 1]`` and the
    nonnegative orthant.  ``b = A u_feas`` for a point strictly inside ``U``,
    so the feasible set has an interior.  Returns a dict of plain lists
    (JSON-ready) that includes the interior point ``u_feas``.
    """
    rng = np.random.default_rng(seed)
    n = int(sum(sizes))
    M = rng.standard_normal((n, n))
    Q = M.T @ M / n + shift * np.eye(n)
    Q = (Q + Q.T) / 2
    q = rng.standard_normal(n)
    kinds = ("all", "box", "nonneg")
    blocks, feas = [], []
    for i, ni in enumerate(sizes):
        kind = kinds[i % 3]
        Ai = rng.standard_normal((m, ni))
        if kind == "all":
            feas.append(rng.standard_normal(ni))
        elif kind == "box":
            feas.append(rng.uniform(-0.5, 0.5, ni))
        else:
            feas.append(rng.uniform(0.2, 1.0, ni))
        blk = {"A": Ai.tolist(), "set": kind}
        if kind == "box":
            blk.update(lo=-1.0, hi=1.0)
        blocks.append(blk)
    u_feas = np.concatenate(feas)
    A = np.hstack([np.asarray(blk["A"]) for blk in blocks])
    b = A @ u_feas
    return {"Q": Q.tolist(), "q": q.tolist(), "b": b.tolist(), "blocks": blocks,
            "u_feas": u_feas.tolist()}


def qp_from_data(data):
    """Build a :class:`BlockProblem` from :func:`block_qp_data` output."""
    blocks = []
    for blk in data["blocks"]:
        A = np.asarray(blk["A"], dtype=float)
        ni = A.shape[1]
        kind = blk.get("set", "all")
        if kind == "all":
            cset = ConstraintSet.all_space(ni)
        elif kind == "box":
            cset = ConstraintSet.box(blk["lo"], blk["hi"], ni)
        elif kind == "nonneg":
            cset = ConstraintSet.nonnegative(ni)
        else:
            raise InvalidArgument(f"unknown constraint set {kind!r}")
        blocks.append(BlockSpec(A, cset=cset))
    coupler = QuadraticCoupler(np.asarray(data["Q"], dtype=float),
                               np.asarray(data["q"], dtype=float))
    return BlockProblem(blocks, coupler, np.asarray(data["b"], dtype=float))


def make_block_qp(seed, sizes=(2, 2, 2), m=2, shift=0.5):
    return qp_from_data(block_qp_data(seed, sizes, m, shift))


def make_d1(seed=0):
    """Desk-scale QP: three blocks of two variables and two coupling rows."""
    return make_block_qp(seed, (2, 2, 2), 2)


def dsvm_toy(seed=0, n=3, c=1.0):
    """Dual-SVM box QP with ``Q = K(X) * yy'`` from a linear kernel plus 0.1 I."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 2))
    y = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    Q = (y[:, None] * y[None, :]) * (X @ X.T) + 0.1 * np.eye(n)
    return DsvmInstance(Q, np.ones(n), y, c=c)


def classification_data(seed, n, m, noise=0.1):
    """Gaussian features ``B`` (n x m), planted ``w`` and labels ``sign(B'w + noise)``."""
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, m))
    w = rng.standard_normal(n)
    s = B.T @ w + noise * rng.standard_normal(m)
    return B, np.where(s >= 0, 1.0, -1.0)


def fused_svm_synthetic(seed=0, n=20, m=50, lam1=0.05, lam2=0.05, gamma=1.0):
    B, labels = classification_data(seed, n, m)
    return FusedSvmInstance(B, labels, lam1, lam2, gamma=gamma)
