"""Sparse least squares with a fixed number of nonzeros, solved by pair-flip simulated annealing."""

from sparsesa.cv import CvReport, common_support_looe, cv_error, make_folds, sweep_k
from sparsesa.linalg import Instance, LsState, Support, solve_restricted, swap_update
from sparsesa.sampler import SaResult, Schedule, anneal
from sparsesa.synthetic import SynthParams, generate

__version__ = "0.1.0"

__all__ = [
    "CvReport",
    "Instance",
    "LsState",
    "SaResult",
    "Schedule",
    "Support",
    "SynthParams",
    "anneal",
    "common_support_looe",
    "cv_error",
    "generate",
    "make_folds",
    "solve_restricted",
    "swap_update",
    "sweep_k",
]
