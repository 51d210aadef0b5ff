"""HMM-guided frame querying for bandwidth-constrained video search."""

from ._core import (  # noqa: F401
    DataError,
    Error,
    FrameServer,
    HmmParams,
    InvalidArgument,
    NUM_LABELS,
    NUM_SYMBOLS,
    TransportError,
    compute_quantiles,
    discretize,
    estimate_emission,
    estimate_initial,
    estimate_transition,
    expected_cross_entropy,
    expected_loss_for_query,
    forward_backward,
    generate_synthetic,
    observation_predictive,
    preset_params,
    query_budget,
    run_episode,
    run_remote_episode,
    run_sweep,
    select_next_query,
    stationary_distribution,
    uniform_query_indices,
)

__version__ = "0.1.0"
