"""Most-likely-optimal (MLO) subsampled Metropolis-Hastings for tall data."""

__version__ = "0.1.0"

from .diagnostics import (
    EmptyChain,
    PosteriorSummary,
    ReplicationReport,
    burn_thin,
    effective_sample_size,
    hpd_interval,
    posterior_summary,
    replication_metrics,
)
from .estimators import (
    PriorZero,
    SizeRule,
    concentration_bound,
    estimator_variance,
    lambda_full,
    lambda_star,
    lambda_star_variance,
    psi_threshold,
    required_size_estimate,
    required_size_full,
    subsampled_loglik,
)
from .models import (
    MleDidNotConverge,
    ModelSpec,
    as_data,
    full_loglik,
    gaussian_mean_model,
    gaussian_precision_model,
    logistic_model,
    mle_standard_errors,
)
from .samplers import (
    ChainConfig,
    ChainRun,
    RandomWalk,
    adaptive_mlo_mh,
    merge_block_estimates,
    mlo_subsampled_mh,
    standard_mh,
    uniform_subsampled_mh,
)
from .weights import (
    AliasTable,
    AllZeroScores,
    NonFiniteWeight,
    SubsampleWeights,
    build_alias,
    draw_subsample,
    mlo_weights,
    uniform_weights,
    weights_from_scores,
)
