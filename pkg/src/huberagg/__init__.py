"""Robust sparse regression with Huber loss: paths, selection, benchmarks."""

from .audit import (
    AuditCheck,
    DiscreteDesign,
    KappaReport,
    bernoulli_design,
    check_hw_condition,
    check_partition_mass,
    cor1_bound,
    delta_op,
    eta_cauchy,
    fp_bound_check,
    kappa_bruteforce,
    quantized_gaussian_design,
    write_audit_json,
)
from .bench import (
    ExperimentPlan,
    ExperimentReport,
    excess_risk_hat,
    g_statistic,
    oracle_risk,
    run_experiment,
)
from .errors import DomainError, PathError, SolverError
from .jumps import (
    AggregateStep,
    IntervalPartition,
    StepFunction,
    agghoo_jumps,
    fit_k_jumps,
    indicator_design,
    jump_to_sparse,
    write_step_csv,
)
from .losses import (
    Dataset,
    SparseFit,
    empirical_risk,
    huber_grad,
    huber_intercept,
    huber_intercept_interval,
    huber_loss,
    zero_norm,
)
from .path import (
    PathConfig,
    SolutionPath,
    ZeroNormFamily,
    build_grid,
    fit_grid_family,
    homotopy_path,
    kkt_certificate,
    lambda_max,
    solve_fixed_lambda,
    zero_norm_family,
)
from .select import (
    AggregatePredictor,
    GridTrainer,
    PathCache,
    SplitScheme,
    ZeroNormTrainer,
    agcv,
    agghoo,
    cv_select,
    holdout_select,
    monte_carlo_splits,
    predict,
)
from .simulate import (
    GroundTruth,
    Setup1Config,
    Setup2Config,
    Setup3Config,
    cauchy_sample,
    derive_seed,
    generate,
    gen_setup1,
    gen_setup2,
    gen_setup3,
    moving_average_weights,
    read_dataset_csv,
    setup1_covariance,
    write_dataset_csv,
)

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "PathError",
    "SolverError",
    "Dataset",
    "SparseFit",
    "empirical_risk",
    "huber_grad",
    "huber_intercept",
    "huber_intercept_interval",
    "huber_loss",
    "zero_norm",
    "PathConfig",
    "SolutionPath",
    "ZeroNormFamily",
    "build_grid",
    "fit_grid_family",
    "homotopy_path",
    "kkt_certificate",
    "lambda_max",
    "solve_fixed_lambda",
    "zero_norm_family",
    "SplitScheme",
    "monte_carlo_splits",
    "predict",
    "AggregatePredictor",
    "holdout_select",
    "agghoo",
    "agcv",
    "cv_select",
    "PathCache",
    "GridTrainer",
    "ZeroNormTrainer",
    "IntervalPartition",
    "StepFunction",
    "AggregateStep",
    "fit_k_jumps",
    "jump_to_sparse",
    "indicator_design",
    "agghoo_jumps",
    "write_step_csv",
    "GroundTruth",
    "Setup1Config",
    "Setup2Config",
    "Setup3Config",
    "cauchy_sample",
    "derive_seed",
    "generate",
    "gen_setup1",
    "gen_setup2",
    "gen_setup3",
    "moving_average_weights",
    "setup1_covariance",
    "read_dataset_csv",
    "write_dataset_csv",
    "DiscreteDesign",
    "KappaReport",
    "AuditCheck",
    "bernoulli_design",
    "quantized_gaussian_design",
    "kappa_bruteforce",
    "cor1_bound",
    "eta_cauchy",
    "check_hw_condition",
    "check_partition_mass",
    "delta_op",
    "fp_bound_check",
    "write_audit_json",
    "ExperimentPlan",
    "ExperimentReport",
    "excess_risk_hat",
    "oracle_risk",
    "g_statistic",
    "run_experiment",
    "__version__",
]
