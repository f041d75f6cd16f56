"""Fused-LASSO SVM on synthetic data.

Each coefficient is its own block and the differences ``z = Du`` form one
more block, so a Jacobian sweep is a batch of scalar soft-thresholds.  The
run below uses the proximal Jacobian core with ``eps = 1``.
"""

import numpy as np

from vappal import (block_stationarity, build_fused_svm, fused_svm_objective,
                    fused_svm_split_objective, run, validate_parameters)
from vappal.benchmarks import fused_svm_synthetic

inst = fused_svm_synthetic(seed=0, n=20, m=50, lam1=0.05, lam2=0.05)
prob, core = build_fused_svm(inst)
params = inst.params(tol_primal=1e-9, tol_change=1e-9, max_iter=20_000)
print(f"proximal weights alpha1 = alpha2 = {inst.alpha1:.4f}")
print(f"regime: {validate_parameters(prob, core, params).regime}")

state, trace = run(prob, core, params, timing=False)
u, z = inst.split(state.u)
print(f"{trace.reason} after {state.k} iterations")
print(f"|Du - z|_inf = {np.abs(inst.D @ u - z).max():.2e}")
print(f"largest block stationarity = {max(block_stationarity(prob, state.u, state.p)):.2e}")
print(f"objective with z = Du: {fused_svm_objective(inst, u):.10f}")
print(f"split objective:       {fused_svm_split_objective(inst, u, z):.10f}")

nz = np.flatnonzero(u)
runs = np.flatnonzero(np.diff(u) != 0).size + 1
print(f"{nz.size} of {inst.n} coefficients are nonzero, grouped in {runs} constant runs")
print(np.round(u, 4))
