"""Finite Wiener chaos expansions F = f0 + sum_p I_p(f_p) and their exact calculus.

Everything here is computed from kernels alone: second moments by the
isometry E[I_p(f) I_q(g)] = 1[p=q] p! <f, g>, products by the multiplication
formula, and the Gamma operators by the pairing rule derived in
``docs/gamma_pairing.md``.
"""

from __future__ import annotations

import math
from typing import Iterable, Mapping

import numpy as np

from .tensor import RawTensor, SymTensor, contract, inner, symmetrize

__all__ = [
    "ChaosVector",
    "mean",
    "variance",
    "l2_inner",
    "l2_norm",
    "wick_product",
    "gamma_step",
    "gamma",
    "gamma_chain",
    "m_centered",
    "cumulant",
    "cumulants",
    "derivative_pairing",
    "inverse_pairing",
]


class ChaosVector:
    """Random variable with a finite chaos expansion over H = R^d.

    ``const`` is the 0th kernel (the mean); ``kernels[p]`` is f_p for p >= 1.
    Zero kernels are dropped on construction so ``max_order`` reflects the
    highest chaos actually present.
    """

    __slots__ = ("dim", "const", "kernels")

    def __init__(self, dim: int, const: float = 0.0, kernels: Mapping[int, SymTensor] | None = None):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = int(dim)
        self.const = float(const)
        if not math.isfinite(self.const):
            raise ValueError("constant term must be finite")
        ks: dict[int, SymTensor] = {}
        for p, f in (kernels or {}).items():
            p = int(p)
            if p < 1:
                raise ValueError("kernel orders must be >= 1; use const for the 0th kernel")
            if not isinstance(f, SymTensor):
                raise TypeError("kernels must be SymTensor instances")
            if f.dim != self.dim:
                raise ValueError(f"kernel of order {p} has dim {f.dim}, expected {self.dim}")
            if f.order != p:
                raise ValueError(f"kernel stored under order {p} has order {f.order}")
            if not f.is_zero():
                ks[p] = f
        self.kernels = dict(sorted(ks.items()))

    @classmethod
    def from_kernel(cls, f: SymTensor) -> "ChaosVector":
        """I_p(f) for a kernel of order p (order 0 gives a constant)."""
        if f.order == 0:
            return cls(f.dim, float(f.coeffs))
        return cls(f.dim, 0.0, {f.order: f})

    @classmethod
    def constant(cls, dim: int, value: float) -> "ChaosVector":
        return cls(dim, value)

    @property
    def max_order(self) -> int:
        return max(self.kernels, default=0)

    def kernel(self, p: int) -> SymTensor:
        if p == 0:
            return SymTensor.scalar(self.const, self.dim)
        return self.kernels.get(p, SymTensor.zeros(self.dim, p))

    def centered(self) -> "ChaosVector":
        return ChaosVector(self.dim, 0.0, self.kernels)

    def _combine(self, other: "ChaosVector", sign: float) -> "ChaosVector":
        _check_dim(self, other)
        ks = dict(self.kernels)
        for p, g in other.kernels.items():
            ks[p] = ks[p] + g * sign if p in ks else g * sign
        return ChaosVector(self.dim, self.const + sign * other.const, ks)

    def __add__(self, other: "ChaosVector") -> "ChaosVector":
        return self._combine(other, 1.0)

    def __sub__(self, other: "ChaosVector") -> "ChaosVector":
        return self._combine(other, -1.0)

    def __mul__(self, scale: float) -> "ChaosVector":
        s = float(scale)
        return ChaosVector(self.dim, self.const * s, {p: f * s for p, f in self.kernels.items()})

    __rmul__ = __mul__

    def __neg__(self) -> "ChaosVector":
        return self * -1.0

    def __repr__(self) -> str:
        return f"ChaosVector(dim={self.dim}, const={self.const!r}, orders={list(self.kernels)})"


def _check_dim(F: ChaosVector, G: ChaosVector) -> None:
    if F.dim != G.dim:
        raise ValueError(f"dimension mismatch: {F.dim} vs {G.dim}")


class _Accumulator:
    """Collects I_n(kernel) terms by order before building a ChaosVector."""

    def __init__(self, dim: int):
        self.dim = dim
        self.const = 0.0
        self.parts: dict[int, np.ndarray] = {}

    def add(self, t: RawTensor, weight: float) -> None:
        if weight == 0.0:
            return
        if t.order == 0:
            self.const += weight * float(t.coeffs)
            return
        arr = weight * symmetrize(t).coeffs
        if t.order in self.parts:
            self.parts[t.order] = self.parts[t.order] + arr
        else:
            self.parts[t.order] = arr

    def result(self) -> ChaosVector:
        ks = {p: SymTensor(a, self.dim, check=False) for p, a in self.parts.items()}
        return ChaosVector(self.dim, self.const, ks)


def mean(F: ChaosVector) -> float:
    return F.const


def l2_inner(F: ChaosVector, G: ChaosVector) -> float:
    """E[F G] = f0 g0 + sum_p p! <f_p, g_p>."""
    _check_dim(F, G)
    total = F.const * G.const
    for p, f in F.kernels.items():
        g = G.kernels.get(p)
        if g is not None:
            total += math.factorial(p) * inner(f, g)
    return total


def l2_norm(F: ChaosVector) -> float:
    return math.sqrt(max(l2_inner(F, F), 0.0))


def variance(F: ChaosVector) -> float:
    return l2_inner(F, F) - F.const**2


def _product_weight(p: int, q: int, r: int) -> float:
    return math.factorial(r) * math.comb(p, r) * math.comb(q, r)


def wick_product(F: ChaosVector, G: ChaosVector) -> ChaosVector:
    """Pointwise product F G expanded back into chaoses.

    Uses I_p(f) I_q(g) = sum_r r! C(p,r) C(q,r) I_{p+q-2r}(f ⊗̃_r g).
    """
    _check_dim(F, G)
    acc = _Accumulator(F.dim)
    fs = [(0, F.kernel(0))] + list(F.kernels.items()) if F.const else list(F.kernels.items())
    gs = [(0, G.kernel(0))] + list(G.kernels.items()) if G.const else list(G.kernels.items())
    for p, f in fs:
        for q, g in gs:
            for r in range(min(p, q) + 1):
                acc.add(contract(f, g, r), _product_weight(p, q, r))
    return acc.result()


def _pairing_weight(p: int, q: int, r: int) -> float:
    # coefficient of I_{p+q-2-2r}(f_p ⊗̃_{r+1} g_q) in <D I_p(f_p), -D L^{-1} I_q(g_q)>
    return p * math.factorial(r) * math.comb(p - 1, r) * math.comb(q - 1, r)


def gamma_step(F: ChaosVector, G: ChaosVector) -> ChaosVector:
    """<DF, -DL^{-1} G>_H as a chaos expansion; constants of F and G drop out."""
    _check_dim(F, G)
    acc = _Accumulator(F.dim)
    for p, f in F.kernels.items():
        for q, g in G.kernels.items():
            for r in range(min(p, q)):
                acc.add(contract(f, g, r + 1), _pairing_weight(p, q, r))
    return acc.result()


def gamma_chain(F: ChaosVector, k: int) -> list[ChaosVector]:
    """[Gamma_0(F), ..., Gamma_k(F)]."""
    if k < 0:
        raise ValueError("k must be >= 0")
    chain = [F]
    for _ in range(k):
        chain.append(gamma_step(F, chain[-1]))
    return chain


def gamma(F: ChaosVector, k: int) -> ChaosVector:
    return gamma_chain(F, k)[-1]


def m_centered(F: ChaosVector, k: int) -> ChaosVector:
    """Gamma_k(F) - E[Gamma_k(F)]."""
    return gamma(F, k).centered()


def cumulants(F: ChaosVector, r_max: int) -> np.ndarray:
    """kappa_1..kappa_{r_max} of F, returned as an array indexed from 0 (kappa_1 first)."""
    if r_max < 1:
        raise ValueError("r_max must be >= 1")
    chain = gamma_chain(F, r_max - 1)
    out = np.empty(r_max)
    out[0] = F.const
    for r in range(2, r_max + 1):
        out[r - 1] = math.factorial(r - 1) * chain[r - 1].const
    return out


def cumulant(F: ChaosVector, r: int) -> float:
    """kappa_r(F) via kappa_r = (r-1)! E[Gamma_{r-1}(F)]."""
    if r < 1:
        raise ValueError("r must be >= 1")
    return float(cumulants(F, r)[r - 1])


def _pair_with_vector(F: ChaosVector, f: SymTensor, derivative_weight: bool) -> ChaosVector:
    if f.order != 1:
        raise ValueError("pairing direction must be an order-1 kernel")
    if f.dim != F.dim:
        raise ValueError(f"dimension mismatch: {F.dim} vs {f.dim}")
    acc = _Accumulator(F.dim)
    for p, g in F.kernels.items():
        acc.add(contract(g, f, 1), float(p) if derivative_weight else 1.0)
    return acc.result()


def derivative_pairing(F: ChaosVector, f: SymTensor) -> ChaosVector:
    """<DF, f>_H = sum_p p I_{p-1}(f_p ⊗_1 f); equals <D I_1(f), DF>_H."""
    return _pair_with_vector(F, f, True)


def inverse_pairing(F: ChaosVector, f: SymTensor) -> ChaosVector:
    """<-DL^{-1}F, f>_H = sum_p I_{p-1}(f_p ⊗_1 f)."""
    return _pair_with_vector(F, f, False)


def sum_vectors(items: Iterable[ChaosVector], dim: int) -> ChaosVector:
    out = ChaosVector(dim)
    for it in items:
        out = out + it
    return out
