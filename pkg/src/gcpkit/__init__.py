"""Generalized counting processes: state probabilities, time changes, simulation and checks."""

__version__ = "0.1.0"

from .errors import (DivergentSeriesError, EvaluationError, InfiniteMomentError,  # noqa: E402
                     NumericalConsistencyError, ParameterError)
from .gcp_core import GcpParams, TruncatedPmf, gcp_pgf, gcp_pmf, gcp_sample  # noqa: E402
from .subordinators import BernsteinFn, StabilityProfile  # noqa: E402

__all__ = ["__version__", "DivergentSeriesError", "EvaluationError", "InfiniteMomentError",
           "NumericalConsistencyError", "ParameterError", "GcpParams", "TruncatedPmf",
           "gcp_pgf", "gcp_pmf", "gcp_sample", "BernsteinFn", "StabilityProfile"]
