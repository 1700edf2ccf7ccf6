"""Noisy Bayesian quadrature with Matern kernels.

Monte Carlo, maximum-variance Bayesian quadrature and the two-batch MVS-MC
estimator, the integrands they are tested on, a reference integrator, and an
experiment harness that measures error scaling.
"""

from noisybq._backend import BACKEND
from noisybq.gp import ConfidenceBand, GpState, fit_hyperparams, log_marginal_likelihood
from noisybq.harness import ExperimentConfig, ScalingFit, TrialRecord, aggregate, fit_scaling, run_experiment
from noisybq.integrands import (
    BumpClassSpec,
    Integrand,
    NoisyOracle,
    SignGame,
    WeightDensity,
    load_sensor_series,
    make_benchmark,
    make_bump_class,
    make_constant,
    make_synthetic,
    make_weight,
    parse_integrand,
    sign_game_query,
)
from noisybq.kernel import KernelSpec, SmoothnessInfo, kernel_cross, kernel_eval, kernel_matrix
from noisybq.oracle import OracleConfig, OracleResult, integrate
from noisybq.quadrature import (
    EstimateTrace,
    GpConfig,
    StrategyConfig,
    integrate_posterior_mean,
    residual_variance_bound,
    run_mc,
    run_mvs,
    run_mvs_mc,
    select_max_variance,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BumpClassSpec", "ConfidenceBand", "EstimateTrace", "ExperimentConfig", "GpConfig", "GpState",
    "Integrand", "KernelSpec", "NoisyOracle", "OracleConfig", "OracleResult", "ScalingFit", "SignGame",
    "SmoothnessInfo", "StrategyConfig", "TrialRecord", "WeightDensity", "aggregate", "fit_hyperparams",
    "fit_scaling", "integrate", "integrate_posterior_mean", "kernel_cross", "kernel_eval", "kernel_matrix",
    "load_sensor_series", "log_marginal_likelihood", "make_benchmark", "make_bump_class", "make_constant",
    "make_synthetic", "make_weight", "parse_integrand", "residual_variance_bound", "run_experiment", "run_mc",
    "run_mvs", "run_mvs_mc", "select_max_variance", "sign_game_query",
]
