"""zodim: zeroth-order optimization solvers and effective-dimension benchmarks."""

from .problems import (SpectrumSpec, QuadraticProblem, RidgeSeparableProblem,
                       NonconvexTestProblem, ConvexQuarticProblem, ProblemMeta,
                       make_quadratic, make_ridge_separable, evaluate,
                       reference_derivatives, optimum)
from .oracles import (OracleHandle, TaylorOracle, PenalizedOracle, asoe,
                      approximate_gradient, trace_estimate)
from .estimators import (DirectionSampler, GradientEstimate, tilde_grad,
                         hat_grad_rho, moment_diagnostic, error_bound_check)
from .effdim import (EffDimReport, ed_exact, ed_powerlaw_bound, ed_ridge_bound,
                     nn_trace_bound)
from .solvers import (RunTrace, RgConfig, ZhbConfig, AnpeConfig, CubicConfig,
                      rg_rho, zhb, zhb_regularized, anpe_zo, anpe_step_size,
                      cubic_zo, PAPER_C_STEP)
from .harness import (run_experiment, parse_config, load_config, certify,
                      fit_scaling, validate_moments, write_csv, read_csv)

__version__ = "0.1.0"

__all__ = [
    "SpectrumSpec", "QuadraticProblem", "RidgeSeparableProblem",
    "NonconvexTestProblem", "ConvexQuarticProblem", "ProblemMeta",
    "make_quadratic", "make_ridge_separable", "evaluate",
    "reference_derivatives", "optimum",
    "OracleHandle", "TaylorOracle", "PenalizedOracle", "asoe",
    "approximate_gradient", "trace_estimate",
    "DirectionSampler", "GradientEstimate", "tilde_grad", "hat_grad_rho",
    "moment_diagnostic", "error_bound_check",
    "EffDimReport", "ed_exact", "ed_powerlaw_bound", "ed_ridge_bound",
    "nn_trace_bound",
    "RunTrace", "RgConfig", "ZhbConfig", "AnpeConfig", "CubicConfig",
    "rg_rho", "zhb", "zhb_regularized", "anpe_zo", "anpe_step_size",
    "cubic_zo", "PAPER_C_STEP",
    "run_experiment", "parse_config", "load_config", "certify", "fit_scaling",
    "validate_moments", "write_csv", "read_csv",
]
