"""Samplers for Gibbs measures whose losses are estimated by simulation.

The package provides a zig-zag piecewise-deterministic sampler driven by
unbiased gradient estimates (exact for the nominal target), a block
pseudo-marginal Metropolis-Hastings baseline (exact only for an implicit,
m-dependent target), the three worked models (Poisson regression with the
density-power loss, Gaussian regression and a bivariate Gaussian copula
with kernel-discrepancy losses), and an experiment harness.
"""

from .core import (
    Dataset,
    GibbsTarget,
    RateEnvelope,
    SkeletonPoint,
    Trajectory,
    TrajectoryDiagnostics,
    read_skeleton_csv,
    trajectory_batch_means,
    trajectory_discretize,
    trajectory_time_average,
    validate_trajectory,
    write_skeleton_csv,
)
from .zigzag import (
    EnvelopeViolationError,
    ZigZagConfig,
    first_arrival_affine,
    zigzag_run,
    zigzag_run_subsampled,
)
from .losses import (
    Generator,
    RbfKernel,
    beta_grad_phi,
    beta_loss_estimate,
    mmd_grad_phi,
    mmd_loss_biased,
    mmd_loss_unbiased,
    rbf_partial,
)
from .models import GaussianCopulaModel, GaussianRegressionModel, PoissonRegressionModel
from .pmcmc import (
    BlockPmcmcConfig,
    ChainState,
    PmcmcResult,
    block_update,
    bpmcmc_run,
    mh_accept_prob,
)

__all__ = [
    "Dataset",
    "GibbsTarget",
    "RateEnvelope",
    "SkeletonPoint",
    "Trajectory",
    "TrajectoryDiagnostics",
    "read_skeleton_csv",
    "trajectory_batch_means",
    "trajectory_discretize",
    "trajectory_time_average",
    "validate_trajectory",
    "write_skeleton_csv",
    "EnvelopeViolationError",
    "ZigZagConfig",
    "first_arrival_affine",
    "zigzag_run",
    "zigzag_run_subsampled",
    "Generator",
    "RbfKernel",
    "beta_grad_phi",
    "beta_loss_estimate",
    "mmd_grad_phi",
    "mmd_loss_biased",
    "mmd_loss_unbiased",
    "rbf_partial",
    "GaussianCopulaModel",
    "GaussianRegressionModel",
    "PoissonRegressionModel",
    "BlockPmcmcConfig",
    "ChainState",
    "PmcmcResult",
    "block_update",
    "bpmcmc_run",
    "mh_accept_prob",
]
