"""Varying auxiliary problem principle of augmented Lagrangian (VAPP-AL).

Block decomposition solver for

    min G(u) + sum_i J_i(u_i)  s.t.  sum_i A_i u_i = b,  u_i in U_i

with a smooth coupling term ``G``, per-block nonsmooth terms ``J_i`` and
simple sets ``U_i``, plus numerical checks of its convergence guarantees.
"""

from .applications import (DsvmInstance, FusedSvmInstance, LogisticInstance,
                           build_dsvm, build_fused_svm, build_logistic, dsvm_update,
                           fused_svm_objective, fused_svm_split_objective,
                           fused_svm_u_update, fused_svm_z_update, logistic_updates)
from .core import (IdentityQuadratic, JacobianQuadratic, NewtonDiagonal,
                   QuadraticCoreMatrices, bregman_distance, build_quadratic_core_matrices,
                   check_underline_psd, core_value, grad_core, psd_proximal_weight)
from .diagnostics import (CheckReport, ErgodicPoint, RateFit, Trace, TraceRecord,
                          block_stationarity, ergodic_average, ergodic_bound, ergodic_path,
                          increment_monotonicity_check, increment_series, merit_lambda,
                          nonergodic_bound_check, nonergodic_nu, rate_fit,
                          reference_saddle, vi_gap)
from .errors import (ContractViolation, DataValidationError, DiagnosticUnavailable,
                     InvalidArgument, NoConvergence, NumericalFailure, ParameterRejected,
                     ParseError, SingularWeight, SizeLimitExceeded, UnsupportedBlock,
                     UnsupportedCombination, VappError)
from .problem import (BlockProblem, BlockSpec, FunctionCoupler, L1Term, QuadraticCoupler,
                      SaddleReference, SmoothCoupler, ZeroCoupler, ZeroTerm,
                      build_difference_matrix, estimate_lipschitz, eval_objective,
                      primal_residual, spectral_norm_sq)
from .prox import (ConstraintSet, inner_solve_oracle, project_box, shrink,
                   solve_box_qp_exact, solve_quadratic_block)
from .solver import (IterateState, ParamReport, SolverParams, WeightSequence,
                     default_parameters, initial_state, run, solve_block_subproblem,
                     validate_parameters, vapp_iterate, weight_sequence)

__all__ = [
    "DsvmInstance", "FusedSvmInstance", "LogisticInstance", "build_dsvm", "build_fused_svm",
    "build_logistic", "dsvm_update", "fused_svm_objective", "fused_svm_split_objective",
    "fused_svm_u_update", "fused_svm_z_update", "logistic_updates", "IdentityQuadratic",
    "JacobianQuadratic", "NewtonDiagonal", "QuadraticCoreMatrices", "bregman_distance",
    "build_quadratic_core_matrices", "check_underline_psd", "core_value", "grad_core",
    "psd_proximal_weight", "CheckReport", "ErgodicPoint", "RateFit", "Trace", "TraceRecord",
    "block_stationarity", "ergodic_average", "ergodic_bound", "ergodic_path",
    "increment_monotonicity_check", "increment_series", "merit_lambda",
    "nonergodic_bound_check", "nonergodic_nu", "rate_fit", "reference_saddle", "vi_gap",
    "ContractViolation", "DataValidationError", "DiagnosticUnavailable", "InvalidArgument",
    "NoConvergence", "NumericalFailure", "ParameterRejected", "ParseError",
    "SingularWeight", "SizeLimitExceeded", "UnsupportedBlock", "UnsupportedCombination",
    "VappError", "BlockProblem", "BlockSpec", "FunctionCoupler", "L1Term",
    "QuadraticCoupler", "SaddleReference", "SmoothCoupler", "ZeroCoupler", "ZeroTerm",
    "build_difference_matrix", "estimate_lipschitz", "eval_objective", "primal_residual",
    "spectral_norm_sq", "ConstraintSet", "inner_solve_oracle", "project_box", "shrink",
    "solve_box_qp_exact", "solve_quadratic_block", "IterateState", "ParamReport",
    "SolverParams", "WeightSequence", "default_parameters", "initial_state", "run",
    "solve_block_subproblem", "validate_parameters", "vapp_iterate", "weight_sequence"
]

__version__ = "0.1.0"
