"""Built-in sequences F_n for demos and acceptance runs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .chaos import ChaosVector
from .target import TargetSpec, to_chaos
from .tensor import SymTensor, sym_outer

__all__ = ["Family", "FAMILIES", "get_family", "fourth_moment_kernel"]


@dataclass(frozen=True)
class Family:
    name: str
    description: str
    build: Callable[[int, TargetSpec], ChaosVector]
    default_target: TargetSpec | None
    kappa_max: int | None = None


def fourth_moment_kernel(n: int) -> SymTensor:
    """n^{-1/2} sum_{i<=n} e_{2i-1} ⊗̃ e_{2i} on R^{2n}; I_2 of it has variance 1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    d = 2 * n
    f = np.zeros((d, d))
    for i in range(n):
        f[2 * i, 2 * i + 1] = f[2 * i + 1, 2 * i] = 0.5 / np.sqrt(n)
    return SymTensor(f, d, check=False)


def _fourth_moment(n: int, X: TargetSpec) -> ChaosVector:
    return ChaosVector.from_kernel(fourth_moment_kernel(n))


def _chi_square(n: int, X: TargetSpec) -> ChaosVector:
    # sum_{i<=k} (R_i^2 - 1) for every n: an exact fixed point
    k = max(1, X.k1)
    f = np.zeros((k, k))
    np.fill_diagonal(f, 1.0)
    return ChaosVector.from_kernel(SymTensor(f, k, check=False))


def _constant(n: int, X: TargetSpec) -> ChaosVector:
    return to_chaos(X)


def _decaying(n: int, X: TargetSpec) -> ChaosVector:
    dim = X.min_dim + 1
    bump = sym_outer(np.eye(dim)[0], np.eye(dim)[dim - 1])
    return to_chaos(X, dim) + ChaosVector.from_kernel(bump) * (1.0 / n)


def _wrong_variance(n: int, X: TargetSpec) -> ChaosVector:
    return to_chaos(X) * 1.1


FAMILIES: dict[str, Family] = {
    f.name: f
    for f in [
        Family(
            "fourth-moment",
            "I_2(n^{-1/2} sum e_{2i-1} ⊗̃ e_{2i}), tends to N(0,1)",
            _fourth_moment,
            TargetSpec(1.0),
            kappa_max=4,
        ),
        Family(
            "chi-square",
            "I_2(sum_{i<=k1} e_i ⊗ e_i), exactly sum (R_i^2 - 1) for every n",
            _chi_square,
            TargetSpec(0.0, (1.0,)),
        ),
        Family(
            "decaying-perturbation",
            "target embedding plus n^{-1} I_2(e_first ⊗̃ e_extra)",
            _decaying,
            TargetSpec(1.0, (1.0,)),
        ),
        Family("constant", "the target embedding itself for every n", _constant, TargetSpec(1.0)),
        Family(
            "wrong-variance",
            "1.1 times the target embedding; never converges",
            _wrong_variance,
            TargetSpec(1.0),
        ),
    ]
}


def get_family(name: str) -> Family:
    try:
        return FAMILIES[name]
    except KeyError:
        raise KeyError(f"unknown family '{name}'; choose from {sorted(FAMILIES)}") from None
