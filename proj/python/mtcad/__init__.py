"""Device-activity detection toolkit: signal simulator, covariance
coordinate-descent detector, and the attention-based detector."""

from ._core import (
    CdResult,
    HTConfig,
    HetTransformer,
    OperatingPoint,
    Sample,
    Scenario,
    ScenarioConfig,
    bench_seconds_per_sample,
    detect_cd,
    draw_sample,
    generate_scenario,
    nll,
    noise_power_watts,
    operating_point,
    path_loss_db,
    pm_pf,
    roc_sweep,
    sample_covariance,
    threshold,
    train_ht,
    weighted_bce_loss,
)

__all__ = [
    "CdResult",
    "HTConfig",
    "HetTransformer",
    "OperatingPoint",
    "Sample",
    "Scenario",
    "ScenarioConfig",
    "bench_seconds_per_sample",
    "detect_cd",
    "draw_sample",
    "generate_scenario",
    "nll",
    "noise_power_watts",
    "operating_point",
    "path_loss_db",
    "pm_pf",
    "roc_sweep",
    "sample_covariance",
    "threshold",
    "train_ht",
    "weighted_bce_loss",
]
