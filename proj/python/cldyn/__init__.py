"""Contrastive learning dynamics: covariance operators, two-layer training, experiments."""

from ._cldyn import (
    DimensionError,
    DivergenceError,
    DomainError,
    Error,
    FormatError,
    GeneratorPool,
    InvalidBatch,
    InvalidConfiguration,
    TwoLayerNet,
    analytic_A_summation,
    blowup_time,
    build_pool,
    contrastive_covariance,
    default_config,
    gated_operator,
    infonce_loss,
    make_embedding,
    matching_scores,
    modulation_probability,
    power_iterate_summation,
    quadratic_loss,
    rank1_top_eigen,
    render_weight_grid,
    run_experiment,
    sample_summation,
    simulate_1d,
    summation_population_A,
    summation_tie_threshold,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]
