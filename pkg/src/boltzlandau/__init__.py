"""Evaluation of the scaled non-cutoff Boltzmann and Landau collision operators.

The package evaluates both operators on Gaussian-polynomial data, checks their
closed-form angular identities and conservation properties, measures the
grazing rate ``Q_B -> Q_L`` in ``1 - s``, linearizes both around the
Maxwellian in a Galerkin basis and compares the resulting relaxation dynamics.
"""

__version__ = "0.1.0"

from .boltzmann import EvalConfig, ToleranceError, estimate_Q, eval_Q, eval_Q_far, eval_Q_near, weak_Q
from .fields import CapacityError, GaussianTerm, Polynomial, SmoothField, maxwellian, sqrt_maxwellian
from .grazing import RateReport, convergence_study, decompose
from .kernel import KernelParams, OperatorGradeError, ParameterError
from .landau import eval_QL, estimate_QL, weak_QL
from .linearized import GalerkinBasis, HarmonicExpansion, LinearMode, anisotropic_norm, assemble_L_matrix
from .relaxation import NumericalAbort, compare_trajectories, integrate, precompute_tensors

__all__ = [
    "CapacityError",
    "EvalConfig",
    "GalerkinBasis",
    "GaussianTerm",
    "HarmonicExpansion",
    "KernelParams",
    "LinearMode",
    "NumericalAbort",
    "OperatorGradeError",
    "ParameterError",
    "Polynomial",
    "RateReport",
    "SmoothField",
    "ToleranceError",
    "anisotropic_norm",
    "assemble_L_matrix",
    "compare_trajectories",
    "convergence_study",
    "decompose",
    "estimate_Q",
    "estimate_QL",
    "eval_Q",
    "eval_QL",
    "eval_Q_far",
    "eval_Q_near",
    "integrate",
    "maxwellian",
    "precompute_tensors",
    "sqrt_maxwellian",
    "weak_Q",
    "weak_QL",
]
