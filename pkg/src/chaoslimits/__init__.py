"""Exact Gamma-operator calculus on finite Wiener chaoses and convergence checks
towards laws in the first two chaoses."""

__version__ = "0.1.0"

from .chaos import ChaosVector, cumulant, gamma, gamma_step, l2_inner, variance, wick_product
from .criteria import (
    build_polynomial,
    feasibility_gate,
    gamma_combination,
    target_check,
    sequence_check,
)
from .target import CorrelatedSpec, TargetSpec, canonicalize, target_cf, target_cumulant, to_chaos
from .tensor import SymTensor, contract, inner, norm, sym_contract, symmetrize

__all__ = [
    "ChaosVector",
    "CorrelatedSpec",
    "SymTensor",
    "TargetSpec",
    "build_polynomial",
    "canonicalize",
    "contract",
    "cumulant",
    "feasibility_gate",
    "gamma",
    "gamma_combination",
    "gamma_step",
    "inner",
    "l2_inner",
    "target_check",
    "norm",
    "sequence_check",
    "sym_contract",
    "symmetrize",
    "target_cf",
    "target_cumulant",
    "to_chaos",
    "variance",
    "wick_product",
]
