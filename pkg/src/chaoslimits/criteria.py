"""Decision procedures for convergence towards a second-chaos target.

The central object is the criterion polynomial
P(x) = x^{1+1[a!=0]} prod(x - b_j) prod(x - c_j)^2 and its weights
w_r = P^(r)(0) / (r! 2^(r-1)).  A chaos vector F matches the target law when
its first deg(P) cumulants agree with the target's and the combination
sum_r w_r (Gamma_{r-1}(F) - E Gamma_{r-1}(F)) vanishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .chaos import (
    ChaosVector,
    cumulants,
    derivative_pairing,
    gamma_chain,
    l2_norm,
    variance,
)
from .tensor import SymTensor, contract, inner, norm, sym_contract
from .target import CorrelatedSpec, TargetSpec, target_cumulants

__all__ = [
    "CriterionPolynomial",
    "Thresholds",
    "CheckResult",
    "ConvergenceReport",
    "build_polynomial",
    "polynomial_from_weights",
    "elementary_symmetric",
    "elementary_symmetric_excluding",
    "expansion_coefficients",
    "gamma_combination",
    "target_check",
    "sequence_check",
    "loglog_slope",
    "half_contraction_constant",
    "sufficient_contraction_check",
    "chi_square_check",
    "chi_gauss_index_sets",
    "chi_gauss_kernel_check",
    "stable_kernel_stats",
    "mixed_chaos_stable_stats",
    "feasibility_gate",
    "correlated_feasibility_gate",
    "cumulant_identity_residual",
]

PASS = "pass"
PASS_TREND = "pass (trend)"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"


# ---------------------------------------------------------------- polynomial


@dataclass(frozen=True)
class CriterionPolynomial:
    """P and its derivative weights.

    ``coeffs[r]`` is P^(r)(0)/r! (ascending monomial coefficients) and
    ``weights[r]`` is w_r for r = 0..deg; ``weights[0]`` is always 0.
    """

    roots: tuple[float, ...]
    coeffs: np.ndarray
    weights: np.ndarray
    gaussian: bool
    repeated_roots: bool

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, self.coeffs)


def _poly_from_roots(roots: Sequence[float]) -> np.ndarray:
    # ascending coefficients of prod(x - root), built by repeated convolution
    out = np.array([1.0])
    for z in roots:
        out = np.convolve(out, [-z, 1.0])
    return out


def build_polynomial(X: TargetSpec) -> CriterionPolynomial:
    zero_mult = 2 if X.a != 0.0 else 1
    roots = [0.0] * zero_mult + list(X.b)
    for c, _ in X.cd:
        roots += [c, c]
    coeffs = _poly_from_roots(roots)
    coeffs.setflags(write=False)
    weights = np.array([0.0] + [coeffs[r] / 2.0 ** (r - 1) for r in range(1, len(coeffs))])
    weights.setflags(write=False)
    nonzero = list(X.b) + [c for c, _ in X.cd]
    repeated = len(set(nonzero)) < len(nonzero)
    return CriterionPolynomial(tuple(roots), coeffs, weights, X.a != 0.0, repeated)


def polynomial_from_weights(weights: Sequence[float]) -> np.ndarray:
    """Roots of the polynomial whose weights are ``weights`` (w_0 ignored)."""
    w = np.asarray(weights, dtype=float)
    coeffs = np.array([0.0] + [w[r] * 2.0 ** (r - 1) for r in range(1, len(w))])
    return np.polynomial.polynomial.polyroots(coeffs)


def elementary_symmetric(values: Sequence[float]) -> np.ndarray:
    """[e_0, e_1, ..., e_k] of the given values; e_0 = 1 (also for empty input)."""
    e = np.zeros(len(values) + 1)
    e[0] = 1.0
    for i, v in enumerate(values, start=1):
        e[1 : i + 1] = e[1 : i + 1] + v * e[0:i]
    return e


def elementary_symmetric_excluding(values: Sequence[float], l: int) -> np.ndarray:
    """Elementary symmetric polynomials of ``values`` with entry ``l`` (0-based) left out."""
    if not 0 <= l < len(values):
        raise IndexError(f"index {l} outside [0, {len(values)})")
    return elementary_symmetric([v for i, v in enumerate(values) if i != l])


def _esym(e: np.ndarray, j: int) -> float:
    return float(e[j]) if 0 <= j < len(e) else 0.0


def expansion_coefficients(X: TargetSpec) -> np.ndarray:
    """P^(l)(0)/l! for l = 0..deg, from elementary symmetric sums of b and c.

    With T over the b's, S over the c's and deg = k + 1 + 1[a!=0]
    (k = k1 + 2 k2), the coefficient of x^l is
    (-1)^(deg-l) sum_{j1+j2+j3 = deg-l} T_j1 S_j2 S_j3.
    """
    T = elementary_symmetric(X.b)
    S = elementary_symmetric([c for c, _ in X.cd])
    k = X.k1 + 2 * X.k2
    deg = k + (2 if X.a != 0.0 else 1)
    out = np.zeros(deg + 1)
    for l in range(deg + 1):
        m = deg - l
        total = 0.0
        for j1 in range(m + 1):
            for j2 in range(m - j1 + 1):
                total += _esym(T, j1) * _esym(S, j2) * _esym(S, m - j1 - j2)
        out[l] = (-1) ** m * total
    return out


def gamma_combination(F: ChaosVector, P: CriterionPolynomial) -> ChaosVector:
    """sum_r w_r (Gamma_{r-1}(F) - E Gamma_{r-1}(F))."""
    chain = gamma_chain(F, P.degree - 1)
    out = ChaosVector(F.dim)
    for r in range(1, P.degree + 1):
        w = float(P.weights[r])
        if w != 0.0:
            out = out + chain[r - 1].centered() * w
    return out


# ------------------------------------------------------------ main criterion


@dataclass(frozen=True)
class Thresholds:
    """Pass thresholds.

    ``kappa`` and ``combo`` are exact-family thresholds; a statistic whose
    last value is below them passes outright.  Otherwise a sequence passes
    on trend when its log-log slope is at most ``slope`` and its last value
    is below ``trend_kappa`` / ``trend_combo``.
    """

    kappa: float = 1e-6
    combo: float = 1e-6
    trend_kappa: float = 0.25
    trend_combo: float = 0.25
    slope: float = -0.25

    def as_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "combo": self.combo,
            "trend_kappa": self.trend_kappa,
            "trend_combo": self.trend_combo,
            "slope": self.slope,
        }


@dataclass
class CheckResult:
    """Diagnostics for a single chaos vector against a target."""

    kappa_gaps: list[float]
    combo_l2: float
    contractions: dict[str, float]
    verdict: str
    conditional_l1: dict | None = None


def self_contraction_norms(F: ChaosVector) -> dict[str, float]:
    """||f_p ⊗̃_l f_p|| for every kernel of order >= 2 and 1 <= l <= p-1."""
    out = {}
    for p, f in F.kernels.items():
        for l in range(1, p):
            out[f"p{p}_l{l}"] = norm(sym_contract(f, f, l))
    return out


def target_check(
    F: ChaosVector,
    X: TargetSpec,
    thresholds: Thresholds | None = None,
    *,
    kappa_max: int | None = None,
    mc_config=None,
) -> CheckResult:
    """Cumulant gaps r = 1..deg(P) and the exact L2 norm of the Gamma combination.

    ``kappa_max`` extends the cumulant gaps beyond deg(P) (never below it).
    With ``mc_config`` (a montecarlo.McConfig) the binned estimate of
    E|E[combination | F]| is attached as well; it is informative only and
    does not enter the verdict.
    """
    th = thresholds or Thresholds()
    if variance(F) <= 0.0:
        raise ValueError("F has zero variance")
    P = build_polynomial(X)
    D = P.degree
    R = max(D, kappa_max or 0)
    chain = gamma_chain(F, R - 1)
    kf = np.empty(R)
    kf[0] = F.const
    for r in range(2, R + 1):
        kf[r - 1] = math.factorial(r - 1) * chain[r - 1].const
    gaps = np.abs(kf - target_cumulants(X, R))
    combo = ChaosVector(F.dim)
    for r in range(1, D + 1):
        w = float(P.weights[r])
        if w != 0.0:
            combo = combo + chain[r - 1].centered() * w
    combo_l2 = l2_norm(combo)
    verdict = PASS if (np.all(gaps <= th.kappa) and combo_l2 <= th.combo) else FAIL
    cond = None
    if mc_config is not None:
        from .montecarlo import conditional_l1

        est = conditional_l1(F, combo, mc_config)
        cond = {"value": est.value, "stderr": est.stderr, "n": est.n, "biased_estimator": True}
    return CheckResult([float(g) for g in gaps], combo_l2, self_contraction_norms(F), verdict, cond)


def loglog_slope(ns: Sequence[float], values: Sequence[float]) -> float | None:
    """Least-squares slope of log(value) against log(n) over strictly positive values."""
    pts = [(math.log(n), math.log(v)) for n, v in zip(ns, values) if v > 0.0]
    if len(pts) < 2:
        return None
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    if np.ptp(x) == 0.0:
        return None
    return float(np.polyfit(x, y, 1)[0])


def _trend_status(ns, values, exact: float, trend: float, max_slope: float) -> tuple[str, float | None]:
    slope = loglog_slope(ns, values)
    last = values[-1]
    if last <= exact:
        return PASS, slope
    if slope is not None and slope <= max_slope and last <= trend:
        return PASS_TREND, slope
    if slope is not None and slope < 0.0:
        return INCONCLUSIVE, slope
    return FAIL, slope


def _merge(statuses: Sequence[str]) -> str:
    if FAIL in statuses:
        return FAIL
    if INCONCLUSIVE in statuses:
        return INCONCLUSIVE
    if PASS_TREND in statuses:
        return PASS_TREND
    return PASS


@dataclass
class ConvergenceReport:
    """Per-n diagnostics of a sequence F_n against a target, plus trend verdicts."""

    n: list[int]
    kappa_gaps: list[list[float]]
    combo_l2: list[float]
    contractions: dict[str, list[float]]
    per_n_verdict: list[str]
    slopes: dict[str, float | None]
    statuses: dict[str, str]
    verdict: str
    polynomial: dict
    thresholds: dict
    conditional_l1: list[dict] | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "n": list(self.n),
            "kappa_gaps": [list(g) for g in self.kappa_gaps],
            "combo_l2": list(self.combo_l2),
            "contractions": {k: list(v) for k, v in self.contractions.items()},
            "verdict": self.verdict,
            "per_n_verdict": list(self.per_n_verdict),
            "slopes": dict(self.slopes),
            "statuses": dict(self.statuses),
            "polynomial": self.polynomial,
            "thresholds": self.thresholds,
        }
        if self.conditional_l1 is not None:
            out["conditional_l1"] = self.conditional_l1
        if self.meta:
            out["meta"] = self.meta
        return out

    def csv_rows(self) -> list[tuple[int, str, float]]:
        rows = []
        for i, n in enumerate(self.n):
            for r, g in enumerate(self.kappa_gaps[i], start=1):
                rows.append((n, f"kappa_gap_{r}", g))
            rows.append((n, "combo_l2", self.combo_l2[i]))
            for key, vals in self.contractions.items():
                rows.append((n, f"contraction_{key}", vals[i]))
            if self.conditional_l1 is not None:
                rows.append((n, "conditional_l1", self.conditional_l1[i]["value"]))
                rows.append((n, "conditional_l1_stderr", self.conditional_l1[i]["stderr"]))
        return rows


def sequence_check(
    items: Sequence[tuple[int, ChaosVector]],
    X: TargetSpec,
    thresholds: Thresholds | None = None,
    *,
    kappa_max: int | None = None,
    mc_config=None,
) -> ConvergenceReport:
    """Run :func:`target_check` for each (n, F_n) and judge the trends.

    Each statistic gets a status: ``pass`` if its last value is under the
    exact threshold, ``pass (trend)`` if it decays with slope <= the trend
    slope and ends under the trend threshold, ``inconclusive`` if it decays
    but misses either of those, ``fail`` otherwise.  The overall verdict is the worst status.
    """
    th = thresholds or Thresholds()
    if not items:
        raise ValueError("empty sequence")
    ns = [int(n) for n, _ in items]
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("n values must be strictly increasing")
    results = [
        target_check(F, X, th, kappa_max=kappa_max, mc_config=mc_config) for _, F in items
    ]
    P = build_polynomial(X)
    gaps = [r.kappa_gaps for r in results]
    combo = [r.combo_l2 for r in results]
    keys = sorted({k for r in results for k in r.contractions})
    contractions = {k: [r.contractions.get(k, 0.0) for r in results] for k in keys}
    statuses: dict[str, str] = {}
    slopes: dict[str, float | None] = {}
    for j in range(len(gaps[0])):
        key = f"kappa_gap_{j + 1}"
        statuses[key], slopes[key] = _trend_status(
            ns, [g[j] for g in gaps], th.kappa, th.trend_kappa, th.slope
        )
    statuses["combo_l2"], slopes["combo_l2"] = _trend_status(
        ns, combo, th.combo, th.trend_combo, th.slope
    )
    poly = {
        "degree": P.degree,
        "roots": list(P.roots),
        "weights": [float(w) for w in P.weights[1:]],
        "repeated_roots": P.repeated_roots,
    }
    cond = None
    if mc_config is not None:
        cond = [r.conditional_l1 for r in results]
    return ConvergenceReport(
        n=ns,
        kappa_gaps=gaps,
        combo_l2=combo,
        contractions=contractions,
        per_n_verdict=[r.verdict for r in results],
        slopes=slopes,
        statuses=statuses,
        verdict=_merge(list(statuses.values())),
        polynomial=poly,
        thresholds=th.as_dict(),
        conditional_l1=cond,
    )


# ------------------------------------------------------- contraction criteria


def half_contraction_constant(p: int) -> float:
    """c_p = 2 (p/2)! C(p-1, p/2-1)^2 for even p."""
    if p % 2:
        raise ValueError(f"p must be even, got {p}")
    h = p // 2
    return 2.0 * math.factorial(h) * math.comb(p - 1, h - 1) ** 2


def _require_even(f: SymTensor, min_order: int) -> int:
    p = f.order
    if p % 2:
        raise ValueError(f"kernel order must be even, got {p}")
    if p < min_order:
        raise ValueError(f"kernel order must be >= {min_order}, got {p}")
    return p


def _off_half_norms(f: SymTensor) -> dict[int, float]:
    p = f.order
    return {l: norm(sym_contract(f, f, l)) for l in range(1, p) if 2 * l != p}


def _weighted_half_iterates(f: SymTensor, P: CriterionPolynomial) -> float:
    cp = half_contraction_constant(f.order)
    acc = np.zeros_like(f.coeffs)
    it = f
    for r in range(1, P.degree + 1):
        if r > 1:
            it = sym_contract(it, f, f.order // 2)
        acc = acc + P.weights[r] * cp**r * it.coeffs
    return float(np.linalg.norm(acc.ravel()))


def _kernel_cumulant_gaps(f: SymTensor, X: TargetSpec, r_max: int) -> dict[int, float]:
    k = cumulants(ChaosVector.from_kernel(f), r_max)
    kx = target_cumulants(X, r_max)
    return {r: float(abs(k[r - 1] - kx[r - 1])) for r in range(1, r_max + 1)}


def sufficient_contraction_check(f: SymTensor, X: TargetSpec) -> dict:
    """Contraction conditions for I_p(f) (p >= 4 even) to be close to X.

    These conditions are sufficient only; their necessity is not known in
    general, and the report says so.
    """
    p = _require_even(f, 4)
    P = build_polynomial(X)
    return {
        "order": p,
        "c_p": half_contraction_constant(p),
        "kappa_gaps": _kernel_cumulant_gaps(f, X, P.degree),
        "off_half_contractions": _off_half_norms(f),
        "half_iterate_combination": _weighted_half_iterates(f, P),
        "label": "sufficient only",
    }


def chi_square_check(f: SymTensor, k1: int, threshold: float = 1e-6) -> dict:
    """Two equivalent descriptions of I_p(f) being close to sum_{i<=k1}(R_i^2 - 1).

    b-side: off-half contractions and ||f ⊗̃_{p/2} f - (2/c_p) f||.
    c-side: off-half contractions, the weighted half-iterate combination for
    P(x) = x (x-1)^k1, and the cumulant gaps r = 1..k1+1.
    Each side passes when all of its statistics are <= ``threshold``.
    """
    p = _require_even(f, 2)
    if k1 < 1:
        raise ValueError("k1 must be >= 1")
    X = TargetSpec(0.0, (1.0,) * k1)
    P = build_polynomial(X)
    cp = half_contraction_constant(p)
    off = _off_half_norms(f)
    b2 = norm(sym_contract(f, f, p // 2) - f * (2.0 / cp))
    c2 = _weighted_half_iterates(f, P)
    gaps = _kernel_cumulant_gaps(f, X, P.degree)
    off_ok = all(v <= threshold for v in off.values())
    b_pass = off_ok and b2 <= threshold
    c_pass = off_ok and c2 <= threshold and all(v <= threshold for v in gaps.values())
    return {
        "order": p,
        "c_p": cp,
        "off_half_contractions": off,
        "b2": b2,
        "c2": c2,
        "kappa_gaps": gaps,
        "b_pass": b_pass,
        "c_pass": c_pass,
        "agree": b_pass == c_pass,
    }


def chi_gauss_index_sets(p: int, l: int) -> tuple[list[tuple[int, int]], list[int]]:
    """Index sets (A_l, B_l) for even p and even l."""
    A = [
        (s, t)
        for s in range(1, p)
        for t in range(1, min(p, 2 * p - 2 * s) + 1)
        if 3 * p - 2 * (s + t) == l
    ]
    B = [s for s in range(1, p) if 2 * p - 2 * s == l]
    return A, B


def _c_pst(p: int, s: int, t: int) -> float:
    return (
        p
        * math.factorial(s - 1)
        * math.factorial(t - 1)
        * math.comb(p - 1, s - 1) ** 2
        * math.comb(p - 1, t - 1)
        * math.comb(2 * p - 2 * s - 1, t - 1)
    )


def _k_ps(p: int, s: int) -> float:
    return math.factorial(s - 1) * math.comb(p - 1, s - 1) ** 2


def chi_gauss_kernel_check(f: SymTensor, a: float, b: float) -> dict:
    """Statistics C_l for I_p(f) approaching aN + b(xi^2 - 1), even l in [2, 3p-4].

    Also reports the gaps in the two normalisations p!||f||^2 -> a^2 + 2b^2
    and <f ⊗̃_{p/2} f, f> -> 8 b^3 / (p! (p/2)! C(p, p/2)^2).
    """
    p = _require_even(f, 4)
    half_pairs = {s: sym_contract(f, f, s) for s in range(1, p)}
    stats = {}
    for l in range(2, 3 * p - 3, 2):
        A, B = chi_gauss_index_sets(p, l)
        acc = np.zeros((f.dim,) * l)
        for s, t in A:
            acc = acc + _c_pst(p, s, t) * sym_contract(half_pairs[s], f, t).coeffs
        for s in B:
            acc = acc - 2.0 * b * _k_ps(p, s) * half_pairs[s].coeffs
        stats[l] = float(np.linalg.norm(acc.ravel()))
    h = p // 2
    third = 8.0 * b**3 / (math.factorial(p) * math.factorial(h) * math.comb(p, h) ** 2)
    return {
        "order": p,
        "C_l": stats,
        "variance_gap": abs(math.factorial(p) * inner(f, f) - (a * a + 2 * b * b)),
        "third_gap": abs(inner(half_pairs[h], f) - third),
    }


# ------------------------------------------------------------- stable limits


def _unit_direction(f: SymTensor) -> None:
    if f.order != 1:
        raise ValueError("direction must be an order-1 kernel")
    if abs(norm(f) - 1.0) > 1e-10:
        raise ValueError("direction must have unit norm")


def stable_kernel_stats(g: SymTensor, f: SymTensor) -> dict:
    """||g ⊗_{p-1} g|| and ||g ⊗_1 f||, with the bound ||g ⊗_1 f||^2 <= ||g ⊗_{p-1} g|| ||f||^2."""
    _unit_direction(f)
    p = g.order
    if p < 1:
        raise ValueError("g must have order >= 1")
    gg = norm(contract(g, g, p - 1))
    gf = norm(contract(g, f, 1))
    bound = gg * inner(f, f)
    return {
        "order": p,
        "self_contraction": gg,
        "direction_contraction": gf,
        "bound": bound,
        "bound_holds": gf * gf <= bound * (1 + 1e-10) + 1e-300,
    }


def mixed_chaos_stable_stats(F: ChaosVector, f: SymTensor) -> dict:
    """sum_{l=2}^{p-1} (l+1)! <g_{l-1} ⊗̃_{l-1} g_{l+1}, f⊗f> + E[<D I_1(f), DF>^2]."""
    _unit_direction(f)
    p = F.max_order
    ff = sym_contract(f, f, 0)
    cross = 0.0
    for l in range(2, p):
        lo, hi = F.kernels.get(l - 1), F.kernels.get(l + 1)
        if lo is None or hi is None:
            continue
        cross += math.factorial(l + 1) * inner(sym_contract(lo, hi, l - 1), ff)
    pairing = derivative_pairing(F, f)
    second = l2_norm(pairing) ** 2
    return {"cross_term": cross, "derivative_second_moment": second, "statistic": cross + second}


# --------------------------------------------------------------- feasibility


def _abs_partition(values: Sequence[float], rtol: float) -> list[list[int]]:
    blocks: list[list[int]] = []
    for i, v in enumerate(values):
        for blk in blocks:
            ref = abs(values[blk[0]])
            if abs(abs(v) - ref) <= rtol * max(abs(v), ref):
                blk.append(i)
                break
        else:
            blocks.append([i])
    return blocks


def _gate(values: Sequence[float], weights: Sequence[float], rtol: float) -> dict:
    idx = [i for i, v in enumerate(values) if v != 0.0]
    vals = [values[i] for i in idx]
    blocks = [[idx[j] for j in blk] for blk in _abs_partition(vals, rtol)]
    info = []
    failed_2, failed_3 = [], []
    for blk in blocks:
        beta = sum(1 for i in blk if values[i] > 0)
        gamma_ = sum(1 for i in blk if values[i] < 0)
        signed = math.fsum(weights[i] * math.copysign(1.0, values[i]) for i in blk)
        scale = math.fsum(abs(weights[i]) for i in blk)
        ok2 = len(blk) % 2 == 0 and beta == gamma_
        ok3 = abs(signed) <= 1e-9 * max(scale, 1e-300)
        one_based = [i + 1 for i in blk]
        if not ok2:
            failed_2.append(one_based)
        if not ok3:
            failed_3.append(one_based)
        info.append({"indices": one_based, "beta": beta, "gamma": gamma_, "signed_sum": signed})
    return {
        "m": len(idx),
        "blocks": info,
        "conditions": {"1": len(idx) % 2 == 0, "2": not failed_2, "3": not failed_3},
        "failing_blocks": {"2": failed_2, "3": failed_3},
    }


def feasibility_gate(c: Sequence[float], d: Sequence[float] | None = None, *, rtol: float = 1e-9) -> dict:
    """Necessary conditions for sum_j [c_j (P_j^2-1) + d_j P_j] to be a limit of I_p(f_n), p odd.

    Blocks group the non-zero c_j by |c_j| (relative tolerance ``rtol``).
    Verdict ``infeasible`` if any condition fails, ``not-excluded`` otherwise.
    """
    c = [float(v) for v in c]
    d = [0.0] * len(c) if d is None else [float(v) for v in d]
    if len(c) != len(d):
        raise ValueError("c and d must have equal length")
    out = _gate(c, [v * v for v in d], rtol)
    out["verdict"] = "not-excluded" if all(out["conditions"].values()) else "infeasible"
    out["failed_conditions"] = [k for k, ok in out["conditions"].items() if not ok]
    return out


def correlated_feasibility_gate(Y: CorrelatedSpec, *, rtol: float = 1e-9) -> dict:
    """Necessary conditions for a0 U_0 + sum lambda_i (U_i^2-1) to be an odd-chaos limit."""
    lam = list(Y.lambdas)
    sig2 = [s * s for s in Y.sigmas]
    out = _gate(lam, sig2, rtol)
    out["conditions"]["1"] = len(lam) % 2 == 0
    neg = math.fsum(s for s, v in zip(sig2, lam) if v < 0)
    pos = math.fsum(s for s, v in zip(sig2, lam) if v > 0)
    balanced = abs(neg - pos) <= 1e-9 * max(neg + pos, 1e-300)
    out["conditions"]["4"] = balanced and pos < 0.5 and neg < 0.5
    out["sigma2_negative"] = neg
    out["sigma2_positive"] = pos
    out["verdict"] = "not-excluded" if all(out["conditions"].values()) else "infeasible"
    out["failed_conditions"] = [k for k, ok in out["conditions"].items() if not ok]
    return out


# ---------------------------------------------------------- polynomial identity


def cumulant_identity_residual(X: TargetSpec, x: float, *, relative: bool = True) -> float:
    """Residual of the polynomial identity linking target cumulants to the CF's ODE.

    With deg = deg(P), e = 1 + 1[a!=0], k = k1 + 2 k2 and
    S_l = sum_{r=l}^{deg-2} w_{r+2} kappa_{r-l+2} / (r-l+1)!, the identity is

      (2ix)^(e+k-1) [ sum_{l=1}^{deg-2} (ix)^(-l) S_l + C ]
        = ix a^2 G1 G2 + 2ix G2 sum_l b_l^2 prod_{j!=l}(1-2ixb_j)
          + G1 sum_l prod_{j!=l}(1-2ixc_j)^2 [ix D_l (1-2ixc_l) + (ix)^2 c_l D_l - 2ix c_l^2]

    where C = a^2 P''(0)/4 - P'(0) (sum b + sum c + sum d^2/(4c)) and
    D_l = 4c_l^2 + d_l^2.  For a != 0 this is C = (-1)^k1 (a^2/2) prod c^2 prod b.
    Returned as |LHS - RHS|, divided by the sum of absolute values of all
    terms when ``relative`` is set.
    """
    P = build_polynomial(X)
    deg = P.degree
    e = 2 if X.a != 0.0 else 1
    k = X.k1 + 2 * X.k2
    kap = target_cumulants(X, deg)
    w = P.weights
    ix = 1j * float(x)
    expo = e + k - 1
    lhs_terms = []
    for l in range(1, deg - 1):
        s_l = math.fsum(
            w[r + 2] * kap[r - l + 1] / math.factorial(r - l + 1) for r in range(l, deg - 1)
        )
        lhs_terms.append(2.0**expo * ix ** (expo - l) * s_l)
    p1, p2 = float(P.coeffs[1]), float(P.coeffs[2]) * 2.0
    const = X.a**2 * p2 / 4.0 - p1 * math.fsum(
        list(X.b) + [c for c, _ in X.cd] + [d * d / (4 * c) for c, d in X.cd]
    )
    lhs_terms.append((2 * ix) ** expo * const)

    fb = [1 - 2 * ix * b for b in X.b]
    fc = [(1 - 2 * ix * c) ** 2 for c, _ in X.cd]
    g1 = _cprod(fb)
    g2 = _cprod(fc)
    rhs_terms = [ix * X.a**2 * g1 * g2]
    for l, b in enumerate(X.b):
        rhs_terms.append(2 * ix * g2 * b * b * _cprod(fb[j] for j in range(len(fb)) if j != l))
    for l, (c, d) in enumerate(X.cd):
        delta = 4 * c * c + d * d
        bracket = ix * delta * (1 - 2 * ix * c) + ix**2 * c * delta - 2 * ix * c * c
        rhs_terms.append(g1 * _cprod(fc[j] for j in range(len(fc)) if j != l) * bracket)
    diff = abs(sum(lhs_terms) - sum(rhs_terms))
    if not relative:
        return diff
    scale = sum(abs(t) for t in lhs_terms) + sum(abs(t) for t in rhs_terms)
    return diff / scale if scale > 0 else 0.0


def _cprod(values) -> complex:
    out = 1.0 + 0j
    for v in values:
        out *= v
    return out
