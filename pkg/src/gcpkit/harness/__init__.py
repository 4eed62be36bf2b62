"""Goodness-of-fit kit, seeded Monte Carlo runner, experiment suites and the command line."""

from .config import ExperimentConfig, build_config
from .mc import McRun, run_mc
from .stats import GofReport, Moments, chi_square, chi_square_samples, ks_test, ks_two_sample
from .suites import SuiteResult, run_suite

__all__ = ["ExperimentConfig", "build_config", "McRun", "run_mc", "GofReport", "Moments",
           "chi_square", "chi_square_samples", "ks_test", "ks_two_sample", "SuiteResult", "run_suite"]
