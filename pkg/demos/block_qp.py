"""Solve a small block QP and watch the convergence diagnostics.

Three blocks of two variables (free, box, orthant) share two linear
constraints.  The exact solution comes from active-set enumeration, so the
merit value and the ergodic gap can be tracked along the run.
"""

import numpy as np

from vappal import (IdentityQuadratic, default_parameters, ergodic_bound, ergodic_path,
                    reference_saddle, run, validate_parameters, vi_gap)
from vappal.benchmarks import make_d1

prob = make_d1(0)
core = IdentityQuadratic(1.0)
params = default_parameters(prob, core, tol_primal=1e-10, tol_change=1e-10)
print(validate_parameters(prob, core, params).summary())

ref = reference_saddle(prob)
state, trace = run(prob, core, params, reference=ref, keep_iterates=True, timing=False)
print(f"\n{trace.reason} after {state.k} iterations")
print(f"objective {trace.records[-1].objective:.10f}, exact {ref.objective_star:.10f}")
print(f"distance to u*: {np.linalg.norm(state.u - ref.u_star):.2e}")

merit = trace.column("lambda_merit")
print(f"merit: {trace.lambda0:.3e} at start, {merit[-1]:.3e} at the end, "
      f"largest step-to-step increase {np.diff(merit).max():.1e}")

path = ergodic_path(prob, trace.U(), trace.P(), np.ones(len(trace)), params.gamma)
print("\n   t   VI gap      bound")
for t in (0, 9, 99, len(path) - 1):
    gap = vi_gap(prob, path[t], (ref.u_star, ref.p_star))
    bound = ergodic_bound(t, params.delta, 1.0, params.eps, params.rho,
                          ref.u_star, trace.U()[0], ref.p_star, trace.P()[0])
    print(f"{t:4d}  {gap:10.3e}  {bound:10.3e}")
