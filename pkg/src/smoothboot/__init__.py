"""Smoothed and iterated bootstrap confidence intervals for population quantiles."""

__version__ = "0.1.0"

from .engine import BootstrapPlan, EmpiricalDist
from .intervals import (
    IntervalResult,
    TwoSidedResult,
    build_I1,
    build_I1_kappa,
    build_I2,
    build_I3,
    build_I4,
    eq1_error_term,
    fit_interval,
    two_sided,
)
from .kernels import SmoothedDistribution, make_triangular_kernel
from .quantiles import Sample, sample_quantile
from .study import StudyConfig, run_coverage_study

__all__ = [
    "BootstrapPlan", "EmpiricalDist", "IntervalResult", "TwoSidedResult", "build_I1",
    "build_I1_kappa", "build_I2", "build_I3", "build_I4", "eq1_error_term", "fit_interval",
    "two_sided", "SmoothedDistribution", "make_triangular_kernel", "Sample", "sample_quantile",
    "StudyConfig", "run_coverage_study",
]
