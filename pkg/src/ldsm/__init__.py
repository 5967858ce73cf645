"""Identification of symmetric stable linear dynamics from single trajectories.

Debiased lag-moment estimators recover the state matrix (and its observed
blocks under partial observation) in element-wise max norm, alongside OLS and
l1-regularized baselines and a harness that measures how the required
trajectory length scales with the system size.
"""

from .baselines import LassoConfig, lasso_fit, ols_fit, soft_threshold
from .errors import (
    CapExceededError,
    ConvergenceError,
    DegenerateVarianceError,
    InsufficientDataError,
    LdsmError,
    OracleScaleError,
    RejectedInputError,
    SingularMatrixError,
)
from .harness import (
    ExperimentConfig,
    ScalingRun,
    error_metric,
    fit_scaling_curves,
    min_t_single_trial,
    run_sweep,
)
from .linalg import Spectrum, mat_pow, matmul, max_norm, solve_spd, spectral_radius, sym_eigen
from .moments import (
    MomentEstimate,
    PartialBlockEstimates,
    SampleBound,
    block_estimates,
    block_sample_size_bounds,
    lag_moment,
    moment_bias,
    sample_size_bound,
    state_cross_cov,
)
from .simulate import Trajectory, observed_view, rollout
from .systems import SymmetricDynamics, dense_star, partition, random_2regular, random_stable

__version__ = "0.1.0"

__all__ = [
    "CapExceededError",
    "ConvergenceError",
    "DegenerateVarianceError",
    "ExperimentConfig",
    "InsufficientDataError",
    "LassoConfig",
    "LdsmError",
    "MomentEstimate",
    "OracleScaleError",
    "PartialBlockEstimates",
    "RejectedInputError",
    "SampleBound",
    "ScalingRun",
    "SingularMatrixError",
    "Spectrum",
    "SymmetricDynamics",
    "Trajectory",
    "block_estimates",
    "block_sample_size_bounds",
    "dense_star",
    "error_metric",
    "fit_scaling_curves",
    "lag_moment",
    "lasso_fit",
    "mat_pow",
    "matmul",
    "max_norm",
    "min_t_single_trial",
    "moment_bias",
    "observed_view",
    "ols_fit",
    "partition",
    "random_2regular",
    "random_stable",
    "rollout",
    "run_sweep",
    "sample_size_bound",
    "soft_threshold",
    "solve_spd",
    "spectral_radius",
    "state_cross_cov",
    "sym_eigen",
]
