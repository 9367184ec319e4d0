"""Ornstein-Uhlenbeck trajectory simulation, stabilizers, and risk oracles."""

from ._core import (
    BemaConfig,
    CheckpointStream,
    MleIntegration,
    OuemaDebias,
    OuModel,
    RngStream,
    Scheme,
    SpdMatrix,
    SpectralOperator,
    StabilizerKind,
    StabilizerState,
    TrajectorySample,
    bema_weights,
    cramer_rao_lower,
    ema_mse_lower,
    ema_mse_upper,
    em_step,
    em_step_with_noise,
    mle_mse,
    mle_sampling_cov,
    ou_cov,
    ou_exact_step,
    ou_exact_step_with_noise,
    ou_mean,
    ouema_mse_upper,
    read_checkpoint_stream,
    replay,
    run_experiment,
    run_trial,
    simulate,
    spd_fn,
    vanilla_mse,
    wrong_a_mse_upper,
    write_checkpoint_stream,
)

__all__ = [
    "BemaConfig",
    "CheckpointStream",
    "MleIntegration",
    "OuemaDebias",
    "OuModel",
    "RngStream",
    "Scheme",
    "SpdMatrix",
    "SpectralOperator",
    "StabilizerKind",
    "StabilizerState",
    "TrajectorySample",
    "bema_weights",
    "cramer_rao_lower",
    "ema_mse_lower",
    "ema_mse_upper",
    "em_step",
    "em_step_with_noise",
    "mle_mse",
    "mle_sampling_cov",
    "ou_cov",
    "ou_exact_step",
    "ou_exact_step_with_noise",
    "ou_mean",
    "ouema_mse_upper",
    "read_checkpoint_stream",
    "replay",
    "run_experiment",
    "run_trial",
    "simulate",
    "spd_fn",
    "vanilla_mse",
    "wrong_a_mse_upper",
    "write_checkpoint_stream",
]
