"""How the parameter validator sorts runs into convergence regimes.

Small steps satisfy the step-size bound.  A large step can still be safe
when a proximal Jacobian core keeps ``H_under`` positive semidefinite.  A dual
step beyond ``(1 + delta) gamma`` is rejected unless the caller overrides.
Outside both regimes there is no guarantee either way; this instance
happens to converge regardless.
"""

import numpy as np

from vappal import (IdentityQuadratic, JacobianQuadratic, ParameterRejected, SolverParams,
                    default_parameters, psd_proximal_weight, reference_saddle, run,
                    validate_parameters)
from vappal.benchmarks import make_d1

prob = make_d1(0)
f_star = reference_saddle(prob).objective_star
identity = IdentityQuadratic(1.0)
alpha = psd_proximal_weight(prob, theta=1.0, gamma=1.0)
jacobian = JacobianQuadratic(prob, theta=1.0, alpha=alpha)

cases = [
    ("small steps, identity core", identity, default_parameters(prob, identity)),
    ("eps = 1, proximal Jacobian core", jacobian, SolverParams(eps=1.0, gamma=1.0, rho=1.0)),
    ("rho = 3 gamma", identity, default_parameters(prob, identity, rho=3.0)),
]
for name, core, params in cases:
    rep = validate_parameters(prob, core, params)
    print(f"{name}: regime {rep.regime} (eps {params.eps:.3f}, ceiling {rep.eps_ceiling:.3f})")
    params = params.with_(max_iter=5000)
    try:
        state, trace = run(prob, core, params, timing=False)
    except ParameterRejected:
        print("  rejected; running with override")
        state, trace = run(prob, core, params, override=True, timing=False)
    obj = trace.records[-1].objective
    res = np.abs(state.residual).max()
    print(f"  {trace.reason} at k={state.k}: |f - f*| = {abs(obj - f_star):.2e}, "
          f"|Au - b|_inf = {res:.2e}")
