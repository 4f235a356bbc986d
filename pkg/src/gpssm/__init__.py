"""Equilibrium distributions and stability certificates for GP state space models."""
from ._core import BACKEND
from .equilibrium import (
    EquilibriumSolution,
    Grid,
    assemble_M,
    build_grid,
    convergence_study,
    singularity_check,
    solve_equilibrium,
    transition_density,
    transition_matrix,
)
from .errors import *  # noqa: F401,F403
from .gp import (
    GaussianPrediction,
    GpSsmModel,
    OptimizerConfig,
    TrainingSet,
    fit,
    log_marginal_likelihood,
    optimize_hyperparameters,
    train,
)
from .kernels import Kernel, covariance_matrix, kernel_eval
from .nnls import nnls
from .simulate import (
    EnsembleStats,
    KsResult,
    Trajectory,
    ensemble,
    inverse_transform_sample,
    ks_two_sample,
    monte_carlo_equilibrium_check,
    rollout,
    sample_next_state,
)
from .stability import (
    StabilityReport,
    empirical_mean_square,
    mean_square_bound,
    recurrent_set,
    return_time_estimate,
)

__version__ = "0.1.0"
