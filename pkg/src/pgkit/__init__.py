"""Particle MCMC for scalar nonlinear state-space models.

Samplers: bootstrap particle filter, Particle Gibbs (PG), PG with ancestor
sampling, interacting PMCMC, blocked PG and collapsed PG, plus ACF and
Kalman-oracle diagnostics.
"""

__version__ = "0.1.0"

from .blocked import BlockBoundary, BlockPartition, blocked_csmc, blocked_pg_run, make_blocks
from .collapsed import (
    ConjugateState,
    GaussianVarianceConjugate,
    collapsed_pg_run,
    mcsmc,
    predictive_log_marginal,
    update_hyperparams,
)
from .diagnostics import (
    AcfResult,
    KalmanResult,
    LinearGaussianModel,
    acf,
    discard_burn_in,
    kalman_filter_smoother,
    posterior_summary,
    state_rmse,
)
from .ipmcmc import NodeOutput, NodePool, ipmcmc_run, node_zhat, resample_conditional_ids
from .model import (
    BenchmarkModel,
    LinearGaussianSsm,
    NoiseParams,
    RngStream,
    SsmModel,
    benchmark_f,
    benchmark_g,
    read_data_csv,
    simulate,
    write_data_csv,
)
from .samplers import InvGammaPrior, pg_run, pgas_run, sample_theta
from .smc import (
    DegenerateWeightsError,
    ParticleSystem,
    SweepResult,
    ancestor_weights,
    bootstrap_pf,
    csmc,
    csmc_as,
    multinomial_resample,
    normalize_log_weights,
    systematic_resample,
)
from .trace import Trace, read_trace, write_trace

__all__ = [
    "AcfResult", "BenchmarkModel", "BlockBoundary", "BlockPartition", "ConjugateState",
    "DegenerateWeightsError", "GaussianVarianceConjugate", "InvGammaPrior", "KalmanResult",
    "LinearGaussianModel", "LinearGaussianSsm", "NodeOutput", "NodePool", "NoiseParams",
    "ParticleSystem", "RngStream", "SsmModel", "SweepResult", "Trace", "acf", "ancestor_weights",
    "benchmark_f", "benchmark_g", "blocked_csmc", "blocked_pg_run", "bootstrap_pf",
    "collapsed_pg_run", "csmc", "csmc_as", "discard_burn_in", "ipmcmc_run", "kalman_filter_smoother",
    "make_blocks", "mcsmc", "multinomial_resample", "node_zhat", "normalize_log_weights", "pg_run",
    "pgas_run", "posterior_summary", "predictive_log_marginal", "read_data_csv", "read_trace",
    "resample_conditional_ids", "sample_theta", "simulate", "state_rmse", "systematic_resample",
    "update_hyperparams", "write_data_csv", "write_trace",
]
