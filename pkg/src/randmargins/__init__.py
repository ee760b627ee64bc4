"""Differentially private learning of axis-aligned origin-placed rectangles
over finite grids, with pluggable interior point solvers, baselines, and a
statistical privacy verification suite."""

from .errors import (DimensionMismatch, DomainTooLarge, EmptyDataset,
                     InsufficientData, InvalidParams, InvalidStrategy,
                     PairingError, RandMarginsError, TooFewPoints)
from .ipp import (ExpMechInteriorPoint, IppParams, IppSolver,
                  OracleMedianIpp, make_solver, solve_interior_point)
from .learner import (BaselineResult, EmptyRectangle, IterationTrace,
                      PrivacyBudget, RandMarginsParams, RunTrace,
                      baseline_composition_learner, fallback_threshold,
                      learn_rectangle, rand_margins, required_sample_size,
                      variant_divergence, variant_learner)
from .model import (Dataset, ExplicitDistribution, GridDomain,
                    LabeledExample, OriginRectangle, bottom_k_along_axis,
                    empirical_error, generalization_error, predict,
                    top_k_along_axis)
from .noise import LaplaceSpec, ceil_shifted_laplace_pmf, sample_laplace

__version__ = "0.1.0"

__all__ = [
    "BaselineResult", "Dataset", "DimensionMismatch", "DomainTooLarge",
    "EmptyDataset", "EmptyRectangle", "ExpMechInteriorPoint",
    "ExplicitDistribution", "GridDomain", "InsufficientData",
    "InvalidParams", "InvalidStrategy", "IppParams", "IppSolver",
    "IterationTrace", "LabeledExample", "LaplaceSpec", "OracleMedianIpp",
    "OriginRectangle", "PairingError", "PrivacyBudget", "RandMarginsError",
    "RandMarginsParams", "RunTrace", "TooFewPoints",
    "baseline_composition_learner", "bottom_k_along_axis",
    "ceil_shifted_laplace_pmf", "empirical_error", "fallback_threshold",
    "generalization_error", "learn_rectangle", "make_solver", "predict",
    "rand_margins", "required_sample_size", "sample_laplace",
    "solve_interior_point", "top_k_along_axis", "variant_divergence",
    "variant_learner",
]
