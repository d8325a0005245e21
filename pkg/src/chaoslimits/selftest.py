"""Identity suites that must hold to rounding error for every valid input."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chaos import l2_norm
from .criteria import cumulant_identity_residual, build_polynomial, gamma_combination
from .target import TargetSpec, ode_residual, to_chaos
from .tensor import RawTensor, contract, inner, norm, symmetrize

__all__ = ["SuiteResult", "random_target", "run_suites", "SUITES"]


@dataclass(frozen=True)
class SuiteResult:
    name: str
    max_residual: float
    tolerance: float
    cases: int

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tolerance

    def line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (
            f"{self.name:<18} {status}  max_residual={self.max_residual:.3e}  "
            f"tol={self.tolerance:.0e}  cases={self.cases}"
        )


def _signed(rng: np.random.Generator, n: int, low: float, high: float) -> list[float]:
    return [float(s * m) for s, m in zip(rng.choice([-1.0, 1.0], n), rng.uniform(low, high, n))]


def random_target(
    rng: np.random.Generator,
    *,
    max_k1: int = 3,
    max_k2: int = 3,
    low: float = 0.2,
    high: float = 3.0,
    gaussian: bool | None = True,
    repeat_b: bool = False,
) -> TargetSpec:
    """Random TargetSpec with |parameters| in [low, high].

    ``gaussian=None`` draws a = 0 half of the time; ``repeat_b`` duplicates
    the first b so the criterion polynomial has a repeated root.
    """
    k1 = int(rng.integers(0, max_k1 + 1))
    k2 = int(rng.integers(0, max_k2 + 1))
    if gaussian is None:
        gaussian = bool(rng.integers(0, 2))
    if repeat_b and k1 == 0:
        k1 = 1
    a = _signed(rng, 1, low, high)[0] if gaussian else 0.0
    b = _signed(rng, k1, low, high)
    if repeat_b:
        b.append(b[0])
    cd = list(zip(_signed(rng, k2, low, high), _signed(rng, k2, low, high)))
    if a == 0.0 and not b and not cd:
        b = _signed(rng, 1, low, high)
    return TargetSpec(a, tuple(b), tuple(cd))


def _targets(seeds: int, base: int):
    for s in range(seeds):
        rng = np.random.default_rng(base + s)
        yield random_target(rng, gaussian=None if s % 2 else True, repeat_b=s % 5 == 4)


def suite_exact_zero(seeds: int) -> SuiteResult:
    worst = 0.0
    for X in _targets(seeds, 1000):
        combo = gamma_combination(to_chaos(X), build_polynomial(X))
        worst = max(worst, l2_norm(combo))
    return SuiteResult("exact-zero", worst, 1e-8, seeds)


_GRID = np.linspace(-5.0, 5.0, 101)


def suite_ode(seeds: int) -> SuiteResult:
    worst = 0.0
    for X in _targets(seeds, 2000):
        worst = max(worst, max(abs(ode_residual(X, x)) for x in _GRID))
    return SuiteResult("ode-residual", worst, 1e-8, seeds)


def suite_cumulant_identity(seeds: int) -> SuiteResult:
    worst = 0.0
    for X in _targets(seeds, 3000):
        worst = max(worst, max(cumulant_identity_residual(X, x) for x in _GRID))
    return SuiteResult("cumulant-identity", worst, 1e-8, seeds)


def contraction_chain_defect(f: RawTensor, g: RawTensor, r: int) -> float:
    """Largest relative violation of the contraction norm chain for one (f, g, r).

    Checked: ||f ⊗̃_r g||^2 <= ||f ⊗_r g||^2
             = |<f ⊗_{p-r} f, g ⊗_{q-r} g>| <= ||f ⊗_{p-r} f|| ||g ⊗_{q-r} g||
             <= ||f ⊗_{p-r} f|| ||g||^2 <= ||f||^2 ||g||^2.
    """
    p, q = f.order, g.order
    raw = norm(contract(f, g, r)) ** 2
    sym = norm(symmetrize(contract(f, g, r))) ** 2
    ff, gg = contract(f, f, p - r), contract(g, g, q - r)
    mid = abs(inner(ff, gg))
    nff, ngg = norm(ff), norm(gg)
    nf2, ng2 = inner(f, f), inner(g, g)
    scale = max(nf2 * ng2, 1e-300)
    defects = [
        sym - raw,
        abs(raw - mid),
        mid - nff * ngg,
        nff * ngg - nff * ng2,
        nff * ng2 - nf2 * ng2,
    ]
    return max(0.0, max(defects)) / scale


def suite_contraction_chain(seeds: int) -> SuiteResult:
    worst = 0.0
    for s in range(seeds):
        rng = np.random.default_rng(4000 + s)
        d = int(rng.integers(2, 5))
        p, q = (int(v) for v in rng.integers(1, 4, 2))
        f = symmetrize(RawTensor(rng.normal(size=(d,) * p)))
        g = symmetrize(RawTensor(rng.normal(size=(d,) * q)))
        for r in range(min(p, q) + 1):
            worst = max(worst, contraction_chain_defect(f, g, r))
    return SuiteResult("contraction-chain", worst, 1e-10, seeds)


SUITES = {
    "exact-zero": suite_exact_zero,
    "ode-residual": suite_ode,
    "cumulant-identity": suite_cumulant_identity,
    "contraction-chain": suite_contraction_chain,
}


def run_suites(seeds: int = 20) -> list[SuiteResult]:
    if seeds < 1:
        raise ValueError("seeds must be >= 1")
    return [fn(seeds) for fn in SUITES.values()]
