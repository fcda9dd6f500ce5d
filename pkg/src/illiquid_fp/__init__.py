"""Density of an illiquid asset price from a power-series solution of an
infinite-order Fokker-Planck equation, with error control and an exact oracle."""

from .coefficients import (
    CoefficientTable,
    ModelParams,
    Truncation,
    build_full,
    build_truncated,
    normalization_constant,
    residual_check,
)
from .error_control import RatioEstimate, max_safe_k, min_time, ratio_coefficients
from .series import DensityGrid, DensityPoint, eval_density, eval_grid

__all__ = [
    "CoefficientTable",
    "DensityGrid",
    "DensityPoint",
    "ModelParams",
    "RatioEstimate",
    "Truncation",
    "build_full",
    "build_truncated",
    "eval_density",
    "eval_grid",
    "max_safe_k",
    "min_time",
    "normalization_constant",
    "ratio_coefficients",
    "residual_check",
]
