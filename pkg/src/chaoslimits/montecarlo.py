"""Monte Carlo evaluation of chaos expansions.

Samples are evaluated pathwise: with xi_j = I_1(e_j) iid standard normal,

    I_p(f) = sum over multisets mu of size p of
             (p! / prod_j m_j!) f_mu prod_j H_{m_j}(xi_j),

where H_k are the probabilists' Hermite polynomials.  All sampling goes
through :func:`chaoslimits.rng.standard_normals`, so results depend on the
seed and the configuration only, not on how many worker threads ran.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .chaos import ChaosVector, derivative_pairing, gamma_chain, inverse_pairing, variance
from .rng import DEFAULT_BLOCK, standard_normals
from .tensor import SymTensor

__all__ = [
    "McConfig",
    "McEstimate",
    "hermite_table",
    "evaluate_chaos",
    "sample_chaos",
    "k_statistics",
    "empirical_cumulants",
    "empirical_cf",
    "conditional_l1",
    "joint_stable_functionals",
]


def _default_x_grid() -> tuple[float, ...]:
    return tuple(float(x) for x in np.linspace(-5.0, 5.0, 41))


def _default_t_grid() -> tuple[tuple[float, float], ...]:
    vals = (-1.0, 0.0, 0.5, 1.0)
    return tuple((t1, t2) for t1 in vals for t2 in vals)


@dataclass(frozen=True)
class McConfig:
    n: int = 100_000
    seed: int = 0
    x_grid: tuple[float, ...] = field(default_factory=_default_x_grid)
    t_grid: tuple[tuple[float, float], ...] = field(default_factory=_default_t_grid)
    bins: int = 64
    workers: int = 1
    block_size: int = DEFAULT_BLOCK

    def __post_init__(self):
        if self.n < 100:
            raise ValueError("need at least 100 samples")
        if self.bins < 1:
            raise ValueError("bins must be >= 1")
        object.__setattr__(self, "x_grid", tuple(float(x) for x in self.x_grid))
        object.__setattr__(self, "t_grid", tuple((float(a), float(b)) for a, b in self.t_grid))
        if not all(math.isfinite(x) for x in self.x_grid):
            raise ValueError("x grid must be finite")
        if not all(math.isfinite(a) and math.isfinite(b) for a, b in self.t_grid):
            raise ValueError("t grid must be finite")

    def as_dict(self) -> dict:
        # workers is deliberately left out: it never changes results
        return {
            "n": self.n,
            "seed": self.seed,
            "x_grid": list(self.x_grid),
            "t_grid": [list(t) for t in self.t_grid],
            "bins": self.bins,
            "block_size": self.block_size,
        }


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float
    n: int
    biased: bool = False

    def __post_init__(self):
        if not self.stderr >= 0.0:
            raise ValueError("standard error must be non-negative")

    def as_dict(self) -> dict:
        out = {"value": self.value, "stderr": self.stderr, "n": self.n}
        if self.biased:
            out["biased_estimator"] = True
        return out


def hermite_table(x: np.ndarray, m: int) -> list[np.ndarray]:
    """[H_0(x), ..., H_m(x)] by the recurrence H_{k+1} = x H_k - k H_{k-1}."""
    table = [np.ones_like(x)]
    if m >= 1:
        table.append(x.copy())
    for k in range(1, m):
        table.append(x * table[k] - k * table[k - 1])
    return table


def evaluate_chaos(F: ChaosVector, xi) -> np.ndarray | float:
    """F evaluated at standard-normal coordinates xi (shape (d,) or (N, d))."""
    x = np.asarray(xi, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != F.dim:
        raise ValueError(f"expected {F.dim} coordinates, got {x.shape[1]}")
    H = hermite_table(x, F.max_order)
    out = np.full(x.shape[0], F.const)
    for p, f in F.kernels.items():
        idx, vals = f.to_multiset()
        pf = math.factorial(p)
        for row, a in zip(idx, vals):
            if a == 0.0:
                continue
            mult = Counter(row.tolist())
            weight = pf * a
            term = None
            for j, mj in sorted(mult.items()):
                weight /= math.factorial(mj)
                col = H[mj][:, j]
                term = col if term is None else term * col
            out += weight * term
    return float(out[0]) if single else out


def sample_chaos(
    vectors: ChaosVector | Sequence[ChaosVector], cfg: McConfig, *, stream: int = 0
) -> np.ndarray:
    """Evaluate one or more chaos vectors on the same cfg.n normal draws.

    Returns shape (n,) for a single vector, (len(vectors), n) otherwise.
    """
    single = isinstance(vectors, ChaosVector)
    vecs = [vectors] if single else list(vectors)
    dim = vecs[0].dim
    if any(v.dim != dim for v in vecs):
        raise ValueError("all vectors must share dim")
    xi = _normals(cfg, dim, stream)
    vals = np.stack([evaluate_chaos(v, xi) for v in vecs])
    return vals[0] if single else vals


def _normals(cfg: McConfig, dim: int, stream: int) -> np.ndarray:
    return standard_normals(
        cfg.seed, cfg.n, dim, stream=stream, block_size=cfg.block_size, workers=cfg.workers
    )


# ------------------------------------------------------------- k-statistics


def _set_partitions(items: tuple) -> list[list[tuple]]:
    if not items:
        return [[]]
    first, rest = items[0], items[1:]
    out = []
    for part in _set_partitions(rest):
        out.append([(first,)] + part)
        for i in range(len(part)):
            out.append(part[:i] + [(first,) + part[i]] + part[i + 1 :])
    return out


@lru_cache(maxsize=None)
def _kstat_terms(r: int) -> tuple[tuple[int, int, tuple[int, ...]], ...]:
    """k_r as sum of coef / n^(b) * prod S_j over terms (coef, b, powers).

    k_r = sum over set partitions pi of {1..r} of (-1)^(b-1) (b-1)! <pi> / n^(b),
    where <pi> is the sum over distinct sample indices of the product of
    x^|block|, expanded into power sums by Moebius inversion.  n^(b) is the
    falling factorial.  Dividing by it makes each <pi> unbiased for the
    matching product of raw moments, so k_r is unbiased for kappa_r.
    """
    terms: dict[tuple[int, tuple[int, ...]], Fraction] = {}
    for pi in _set_partitions(tuple(range(r))):
        b = len(pi)
        outer = Fraction((-1) ** (b - 1) * math.factorial(b - 1))
        sizes = [len(block) for block in pi]
        for sigma in _set_partitions(tuple(range(b))):
            mu = 1
            powers = []
            for grp in sigma:
                mu *= (-1) ** (len(grp) - 1) * math.factorial(len(grp) - 1)
                powers.append(sum(sizes[i] for i in grp))
            key = (b, tuple(sorted(powers)))
            terms[key] = terms.get(key, Fraction(0)) + outer * mu
    return tuple((int(c), b, pw) for (b, pw), c in sorted(terms.items()) if c != 0)


def _kstat_from_sums(r: int, S: dict[int, np.ndarray], n) -> np.ndarray:
    total = 0.0
    for coef, b, powers in _kstat_terms(r):
        falling = 1.0
        for i in range(b):
            falling = falling * (n - i)
        prod = 1.0
        for pw in powers:
            prod = prod * S[pw]
        total = total + coef * prod / falling
    return total


def k_statistics(sample, r_max: int, *, jackknife: bool = True) -> list[McEstimate]:
    """Unbiased k-statistics k_1..k_{r_max} (r_max <= 6) with delete-one jackknife errors."""
    if not 1 <= r_max <= 6:
        raise ValueError("r_max must lie in 1..6")
    x = np.asarray(sample, dtype=float).ravel()
    n = x.size
    if n <= r_max:
        raise ValueError("need more samples than the cumulant order")
    shift = float(np.mean(x))
    y = x - shift
    powers = {j: y**j for j in range(1, r_max + 1)}
    S = {j: float(np.sum(powers[j])) for j in powers}
    out = []
    for r in range(1, r_max + 1):
        value = float(_kstat_from_sums(r, S, n)) + (shift if r == 1 else 0.0)
        se = 0.0
        if jackknife:
            S_loo = {j: S[j] - powers[j] for j in powers}
            loo = _kstat_from_sums(r, S_loo, n - 1)
            se = float(math.sqrt((n - 1) / n * np.sum((loo - np.mean(loo)) ** 2)))
        out.append(McEstimate(value, se, n))
    return out


def empirical_cumulants(F, r_max: int, cfg: McConfig, *, stream: int = 0) -> list[McEstimate]:
    """k-statistics of a ChaosVector (sampled per cfg) or of a given sample."""
    sample = sample_chaos(F, cfg, stream=stream) if isinstance(F, ChaosVector) else F
    return k_statistics(sample, r_max)


def empirical_cf(F, x_grid: Sequence[float] | None, cfg: McConfig, *, stream: int = 0) -> dict:
    """Empirical characteristic function on a grid, with CI radius 4/sqrt(N)."""
    sample = sample_chaos(F, cfg, stream=stream) if isinstance(F, ChaosVector) else np.asarray(F, float)
    grid = np.asarray(cfg.x_grid if x_grid is None else x_grid, dtype=float)
    vals = np.array([np.mean(np.exp(1j * x * sample)) if x != 0.0 else 1.0 + 0j for x in grid])
    return {"x": grid, "value": vals, "radius": 4.0 / math.sqrt(sample.size), "n": int(sample.size)}


def conditional_l1(F: ChaosVector, G: ChaosVector, cfg: McConfig, *, stream: int = 0) -> McEstimate:
    """Binned estimate of E|E[G | F]|.

    Samples are sorted by F and cut into ``cfg.bins`` equal-count bins; the
    estimate is the sample-weighted mean of |bin average of G|.  Binning
    smooths E[G|F] and so biases the estimate; it is flagged as biased.
    """
    if variance(F) <= 0.0:
        raise ValueError("F has zero variance; conditioning is degenerate")
    fv, gv = sample_chaos([F, G], cfg, stream=stream)
    order = np.argsort(fv, kind="stable")
    total, var = 0.0, 0.0
    for chunk in np.array_split(gv[order], cfg.bins):
        if chunk.size == 0:
            continue
        w = chunk.size / gv.size
        total += w * abs(float(np.mean(chunk)))
        if chunk.size > 1:
            var += w * w * float(np.var(chunk, ddof=1)) / chunk.size
    return McEstimate(total, math.sqrt(var), gv.size, biased=True)


def _complex_mean(z: np.ndarray) -> tuple[complex, float]:
    n = z.size
    m = complex(np.mean(z))
    se = math.sqrt((float(np.var(z.real, ddof=1)) + float(np.var(z.imag, ddof=1))) / n)
    return m, se


def joint_stable_functionals(
    F: ChaosVector,
    f: SymTensor,
    grid: Sequence[tuple[float, float]] | None,
    cfg: McConfig,
    *,
    target=None,
    stream: int = 0,
) -> list[dict]:
    """MC values of the two stable-convergence functionals on a (t1, t2) grid.

    first:  E[exp(i(t1 I_1(f) + t2 F)) <D I_1(f), DF>]
    second: i t1 E[exp(i(t1 I_1(f) + t2 F)) <D I_1(f),
                 sum_r w_r sum_{alpha+beta=r-1, alpha>=1} (i t2)^(k+1[a!=0]-alpha) (-DL^{-1} Gamma_beta F)>]
    The second needs ``target`` (a TargetSpec) for the weights w_r; without
    it only the first is reported.  Both pairings are built exactly as chaos
    vectors and then evaluated pathwise.
    """
    from .criteria import build_polynomial

    if f.order != 1 or abs(float(np.linalg.norm(f.coeffs)) - 1.0) > 1e-10:
        raise ValueError("direction must be a unit order-1 kernel")
    grid = cfg.t_grid if grid is None else tuple(grid)
    xi = _normals(cfg, F.dim, stream)
    i1 = xi @ f.coeffs
    fv = evaluate_chaos(F, xi)
    first_pair = evaluate_chaos(derivative_pairing(F, f), xi)
    inv = None
    if target is not None:
        P = build_polynomial(target)
        k = target.k1 + 2 * target.k2
        top = k + (1 if target.a != 0.0 else 0)
        chain = gamma_chain(F, max(P.degree - 2, 0))
        inv = [evaluate_chaos(inverse_pairing(g, f), xi) for g in chain]
    rows = []
    for t1, t2 in grid:
        phase = np.exp(1j * (t1 * i1 + t2 * fv))
        m1, s1 = _complex_mean(phase * first_pair)
        row = {"t1": t1, "t2": t2, "first": [m1.real, m1.imag], "first_stderr": s1}
        if inv is not None:
            acc = np.zeros(xi.shape[0], dtype=complex)
            for r in range(2, P.degree + 1):
                w = float(P.weights[r])
                if w == 0.0:
                    continue
                for alpha in range(1, r):
                    beta = r - 1 - alpha
                    acc = acc + w * (1j * t2) ** (top - alpha) * inv[beta]
            m2, s2 = _complex_mean(1j * t1 * phase * acc)
            row["second"] = [m2.real, m2.imag]
            row["second_stderr"] = s2
        rows.append(row)
    return rows
