"""Robust estimators for heavy-tailed matrix completion and varying index models."""

from ._core import (
    ConfigError,
    DataError,
    DegenerateDataError,
    HeavytailError,
    McConfig,
    NumericalError,
    ParameterError,
    ShapeError,
    calibrate_levels,
    calibrate_tau,
    clime,
    direction_distance,
    estimate_vicm,
    fit_loglog_slope,
    nuclear_norm,
    psi,
    psi_matrix,
    run_mc_experiment,
    run_vicm_experiment,
    schedule,
    soft_threshold,
    solve_mc,
    svt,
)

__version__ = "0.1.0"
