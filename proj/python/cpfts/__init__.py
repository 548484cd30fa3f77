"""Conformal prediction intervals for functional time series forecasts."""

from ._core import (
    CpftsError,
    calibrate_xi,
    fpca,
    interval_score,
    isotonic_smooth,
    load_series,
    pinball_loss,
    quantile_regression,
    run_backtest,
    run_sequential,
    scale_function,
    select_ar_order,
    select_k_evr,
    synth_generate,
)

__all__ = [
    "CpftsError",
    "calibrate_xi",
    "fpca",
    "interval_score",
    "isotonic_smooth",
    "load_series",
    "pinball_loss",
    "quantile_regression",
    "run_backtest",
    "run_sequential",
    "scale_function",
    "select_ar_order",
    "select_k_evr",
    "synth_generate",
]
