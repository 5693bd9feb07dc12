from ._stopdeck import (
    ConfigError,
    StopdeckRuntimeError,
    LsmcModel,
    MarketParams,
    OptionKind,
    Policy,
    evaluate,
    fbm_covariance,
    fbm_paths,
    gbm_paths,
    harmonic_paths,
    improvement_pct,
    lsmc_apply,
    lsmc_fit,
    payoff_matrix,
    run_cli,
    train_gbm,
)

__all__ = [
    "ConfigError",
    "StopdeckRuntimeError",
    "LsmcModel",
    "MarketParams",
    "OptionKind",
    "Policy",
    "evaluate",
    "fbm_covariance",
    "fbm_paths",
    "gbm_paths",
    "harmonic_paths",
    "improvement_pct",
    "lsmc_apply",
    "lsmc_fit",
    "payoff_matrix",
    "run_cli",
    "train_gbm",
]
