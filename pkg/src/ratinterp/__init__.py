"""Multivariable analytic interpolation with degree constraint.

Solves matrix Nevanlinna-Pick interpolation problems with derivative
constraints for positive-real rational interpolants of bounded McMillan
degree, via homotopy continuation on a modified Riccati equation.
"""

from .cee import CeeSolution, SolverOptions, solve
from .covext import (
    CovarianceSequence,
    estimate_covariances,
    exact_covariances,
    fit_covariances,
    reduce_model,
    simulate,
    singular_value_grid,
)
from .errors import InterpolationError
from .matpoly import MatrixPolynomial, SpectralFactor, is_schur, positive_real_check
from .problem import InterpolationProblem
from .structure import StructureSpec
from .verify import CertificationReport, certify, certify_solution, roundtrip_oracle

__all__ = [
    "CeeSolution",
    "CertificationReport",
    "CovarianceSequence",
    "InterpolationError",
    "InterpolationProblem",
    "MatrixPolynomial",
    "SolverOptions",
    "SpectralFactor",
    "StructureSpec",
    "certify",
    "certify_solution",
    "estimate_covariances",
    "exact_covariances",
    "fit_covariances",
    "is_schur",
    "positive_real_check",
    "reduce_model",
    "roundtrip_oracle",
    "simulate",
    "singular_value_grid",
    "solve",
]
