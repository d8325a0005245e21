"""Target laws living in the first two chaoses.

A target is X = aN + sum_i b_i (R_i^2 - 1) + sum_j [c_j (P_j^2 - 1) + d_j P_j]
with independent standard normals N, R_i, P_j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chaos import ChaosVector
from .rng import standard_normals
from .tensor import SymTensor, norm

__all__ = [
    "TargetSpec",
    "CorrelatedSpec",
    "IllConditionedError",
    "target_cumulant",
    "target_cumulants",
    "target_log_cf",
    "target_cf",
    "log_cf_derivative",
    "ode_residual",
    "to_chaos",
    "canonicalize",
    "from_correlated",
    "sample_target",
]


class IllConditionedError(ValueError):
    """Eigen-decomposition too close to degenerate to split f1 reliably."""


def _floats(values) -> tuple[float, ...]:
    out = tuple(float(v) for v in values)
    if not all(math.isfinite(v) for v in out):
        raise ValueError("parameters must be finite")
    return out


@dataclass(frozen=True)
class TargetSpec:
    """aN + sum b_i (R_i^2-1) + sum [c_j (P_j^2-1) + d_j P_j]."""

    a: float = 0.0
    b: tuple[float, ...] = ()
    cd: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "a", float(self.a))
        if not math.isfinite(self.a):
            raise ValueError("a must be finite")
        object.__setattr__(self, "b", _floats(self.b))
        pairs = []
        for pair in self.cd:
            c, d = _floats(pair)
            pairs.append((c, d))
        object.__setattr__(self, "cd", tuple(pairs))
        if any(v == 0.0 for v in self.b):
            raise ValueError("every b_i must be non-zero")
        if any(c * d == 0.0 for c, d in self.cd):
            raise ValueError("every pair needs c_j * d_j != 0")
        if self.a == 0.0 and not self.b and not self.cd:
            raise ValueError("at least one of a, b, cd must be non-trivial")

    @property
    def k1(self) -> int:
        return len(self.b)

    @property
    def k2(self) -> int:
        return len(self.cd)

    @property
    def c(self) -> np.ndarray:
        return np.array([c for c, _ in self.cd], dtype=float)

    @property
    def d(self) -> np.ndarray:
        return np.array([d for _, d in self.cd], dtype=float)

    @property
    def min_dim(self) -> int:
        return 1 + self.k1 + self.k2


@dataclass(frozen=True)
class CorrelatedSpec:
    """a0 U_0 + sum lambda_i (U_i^2 - 1) with Cov(U_0, U_i) = sigma_i."""

    a0: float
    lambdas: tuple[float, ...]
    sigmas: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "a0", float(self.a0))
        object.__setattr__(self, "lambdas", _floats(self.lambdas))
        object.__setattr__(self, "sigmas", _floats(self.sigmas))
        if len(self.lambdas) != len(self.sigmas):
            raise ValueError("lambda and sigma must have equal length")
        if any(v == 0.0 for v in self.lambdas):
            raise ValueError("every lambda_i must be non-zero")
        if self.a0 == 0.0 and not self.lambdas:
            raise ValueError("a0 = 0 with no lambda terms describes the zero law")
        if self.det <= 0.0:
            raise ValueError(
                f"covariance matrix is not positive definite: 1 - sum(sigma^2) = {self.det:.6g}"
            )

    @property
    def det(self) -> float:
        return 1.0 - math.fsum(s * s for s in self.sigmas)


def target_cumulant(X: TargetSpec, r: int) -> float:
    """Closed-form cumulant kappa_r(X); kappa_1 = 0."""
    if r < 1:
        raise ValueError("r must be >= 1")
    if r == 1:
        return 0.0
    fr = math.factorial(r - 1)
    terms = [X.a**2 if r == 2 else 0.0]
    terms += [2 ** (r - 1) * fr * b**r for b in X.b]
    for c, d in X.cd:
        terms.append(2 ** (r - 1) * fr * c**r)
        terms.append(2.0 ** (r - 3) * math.factorial(r) * c ** (r - 2) * d * d)
    return math.fsum(terms)


def target_cumulants(X: TargetSpec, r_max: int) -> np.ndarray:
    return np.array([target_cumulant(X, r) for r in range(1, r_max + 1)])


def _log_one_minus(x: np.ndarray, beta: float) -> np.ndarray:
    # log(1 - 2 i x beta) on the branch continuous from x = 0; the argument
    # stays inside (-pi/2, pi/2) because the real part is 1
    t = 2.0 * x * beta
    return 0.5 * np.log1p(t * t) + 1j * np.arctan2(-t, 1.0)


def target_log_cf(X: TargetSpec, x) -> np.ndarray | complex:
    """log phi_X(x), continuous in x with value 0 at x = 0."""
    xs = np.asarray(x, dtype=float)
    out = -0.5 * X.a**2 * xs**2 - 1j * xs * math.fsum(X.b) + 0j
    for b in X.b:
        out = out - 0.5 * _log_one_minus(xs, b)
    for c, d in X.cd:
        delta = 4 * c * c + d * d
        out = out + (xs**2 * delta + 2j * c * xs) / (4j * xs * c - 2.0)
        out = out - 0.5 * _log_one_minus(xs, c)
    return out[()] if out.ndim == 0 else out


def target_cf(X: TargetSpec, x) -> np.ndarray | complex:
    """Characteristic function E[exp(i x X)]."""
    return np.exp(target_log_cf(X, x))


def log_cf_derivative(X: TargetSpec, x) -> np.ndarray | complex:
    """phi_X'(x) / phi_X(x), differentiated by hand from the closed form."""
    xs = np.asarray(x, dtype=float) + 0j
    out = -X.a**2 * xs - 1j * math.fsum(X.b)
    for b in X.b:
        out = out + 1j * b / (1 - 2j * xs * b)
    for c, d in X.cd:
        delta = 4 * c * c + d * d
        u, du = xs**2 * delta + 2j * c * xs, 2 * xs * delta + 2j * c
        v, dv = 4j * c * xs - 2.0, 4j * c
        out = out + (du * v - u * dv) / v**2 + 1j * c / (1 - 2j * xs * c)
    return out[()] if out.ndim == 0 else out


def _prod(values) -> complex:
    out = 1.0 + 0j
    for v in values:
        out *= v
    return out


def ode_residual(X: TargetSpec, x: float, *, relative: bool = True) -> complex:
    """Residual of the linear ODE satisfied by phi_X, at a single point x.

    With G1 = prod(1-2ixb_j) and G2 = prod(1-2ixc_j)^2 the ODE reads
    y' G1 G2 = y (-x a^2 - i sum b) G1 G2
               + y G1 sum_l prod_{j!=l}(1-2ixc_j)^2 (-x D_l (1-2ixc_l) - x^2 i c_l D_l + 2x c_l^2)
               + y G2 sum_l i b_l prod_{j!=l}(1-2ixb_j),   D_l = 4c_l^2 + d_l^2.
    y and y' come from the closed form.  With ``relative`` the difference is
    divided by the sum of the absolute values of all terms, which keeps the
    residual at rounding level even where G1 G2 is huge.
    """
    x = float(x)
    y = complex(target_cf(X, x))
    dy = y * complex(log_cf_derivative(X, x))
    fb = [1 - 2j * x * b for b in X.b]
    fc = [(1 - 2j * x * c) ** 2 for c, _ in X.cd]
    g1, g2 = _prod(fb), _prod(fc)
    lhs = dy * g1 * g2
    terms = [y * (-x * X.a**2) * g1 * g2, y * (-1j * math.fsum(X.b)) * g1 * g2]
    for l, (c, d) in enumerate(X.cd):
        delta = 4 * c * c + d * d
        others = _prod(fc[j] for j in range(len(fc)) if j != l)
        inner_term = -x * delta * (1 - 2j * x * c) - x * x * 1j * c * delta + 2 * x * c * c
        terms.append(y * g1 * others * inner_term)
    for l, b in enumerate(X.b):
        others = _prod(fb[j] for j in range(len(fb)) if j != l)
        terms.append(y * g2 * 1j * b * others)
    diff = lhs - sum(terms)
    if not relative:
        return diff
    scale = abs(lhs) + sum(abs(t) for t in terms)
    return diff / scale if scale > 0 else 0j


def to_chaos(X: TargetSpec, dim: int | None = None) -> ChaosVector:
    """Embed X as I_1(f1) + I_2(f2).

    Basis layout (0-based): e_0 carries the Gaussian part, e_1..e_k1 the
    b-terms, and the next k2 vectors the (c, d) pairs.
    """
    need = X.min_dim
    dim = need if dim is None else int(dim)
    if dim < need:
        raise ValueError(f"dim {dim} too small for this target; need at least {need}")
    f1 = np.zeros(dim)
    f2 = np.zeros((dim, dim))
    f1[0] = X.a
    for i, b in enumerate(X.b, start=1):
        f2[i, i] = b
    for j, (c, d) in enumerate(X.cd, start=1 + X.k1):
        f2[j, j] = c
        f1[j] = d
    return ChaosVector(
        dim, 0.0, {1: SymTensor(f1, dim, check=False), 2: SymTensor(f2, dim, check=False)}
    )


def _sorted_spec(a: float, bs, pairs) -> TargetSpec:
    bs = sorted(bs, reverse=True)
    pairs = sorted(pairs, key=lambda cd: (-cd[0], -cd[1]))
    return TargetSpec(a, tuple(bs), tuple(pairs))


def canonicalize(
    f1: SymTensor,
    f2: SymTensor,
    *,
    eig_rtol: float = 1e-10,
    cluster_rtol: float = 1e-9,
    ambiguity_rtol: float = 1e-6,
) -> TargetSpec:
    """Law-equivalent TargetSpec for I_1(f1) + I_2(f2).

    f2 is diagonalised; eigenvalues at or below ``eig_rtol * ||f2||`` count
    as zero.  Numerically equal eigenvalues are grouped, and within a group
    f1 is rotated onto a single eigendirection, which yields one (c, d) pair
    (d >= 0) plus b-entries for the rest of the group.  Whatever part of f1
    is left over becomes the Gaussian coefficient a = its norm.

    Raises IllConditionedError when two distinct eigenvalue groups that
    both carry f1 mass sit closer than ``ambiguity_rtol * ||f2||``: the
    split into (c, d) pairs is then not numerically determined.
    """
    if f1.order != 1 or f2.order != 2:
        raise ValueError("expected an order-1 and an order-2 kernel")
    if f1.dim != f2.dim:
        raise ValueError(f"dimension mismatch: {f1.dim} vs {f2.dim}")
    n1, n2 = norm(f1), norm(f2)
    if n1 == 0.0 and n2 == 0.0:
        raise ValueError("both kernels are zero; there is no target law")
    v1 = f1.coeffs.copy()
    bs: list[float] = []
    pairs: list[tuple[float, float]] = []
    residual = v1.copy()
    if n2 > 0.0:
        lam, vecs = np.linalg.eigh(f2.coeffs)
        eig_tol = eig_rtol * n2
        mass_tol = 1e-10 * max(n1, n2)
        groups: list[list[int]] = []
        for i in np.argsort(lam):
            if groups and abs(lam[i] - lam[groups[-1][-1]]) <= cluster_rtol * n2:
                groups[-1].append(int(i))
            else:
                groups.append([int(i)])
        carrying = []
        for g in groups:
            value = float(np.mean(lam[g]))
            if abs(value) <= eig_tol:
                continue
            basis = vecs[:, g]
            proj = basis.T @ v1
            mass = float(np.linalg.norm(proj))
            if mass > mass_tol:
                pairs.append((value, mass))
                residual = residual - basis @ proj
                bs.extend([value] * (len(g) - 1))
                carrying.append(value)
            else:
                bs.extend([value] * len(g))
        carrying.sort()
        for lo, hi in zip(carrying, carrying[1:]):
            if hi - lo <= ambiguity_rtol * n2:
                raise IllConditionedError(
                    f"eigenvalues {lo:.17g} and {hi:.17g} are nearly equal and both carry "
                    "f1 mass; the (c, d) split is not numerically determined"
                )
    a = float(np.linalg.norm(residual))
    if a <= 1e-12 * max(n1, n2):
        a = 0.0
    return _sorted_spec(a, bs, pairs)


def from_correlated(Y: CorrelatedSpec) -> TargetSpec:
    """Independent-coordinate form of a0 U_0 + sum lambda_i (U_i^2 - 1)."""
    a = Y.a0 * math.sqrt(Y.det)
    bs: list[float] = []
    pairs: list[tuple[float, float]] = []
    for lam, sig in zip(Y.lambdas, Y.sigmas):
        d = Y.a0 * sig
        if d == 0.0:
            bs.append(lam)
        else:
            pairs.append((lam, abs(d)))
    return _sorted_spec(abs(a), bs, pairs)


def sample_target(X: TargetSpec, n: int, seed: int, *, stream: int = 0, workers: int = 1) -> np.ndarray:
    """n iid draws of X from the counter-based normal stream.

    Coordinates follow the basis layout of :func:`to_chaos`, so these draws
    coincide with evaluating ``to_chaos(X)`` on the same normals.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    z = standard_normals(seed, n, X.min_dim, stream=stream, workers=workers)
    out = X.a * z[:, 0]
    for i, b in enumerate(X.b, start=1):
        out = out + b * (z[:, i] ** 2 - 1.0)
    for j, (c, d) in enumerate(X.cd, start=1 + X.k1):
        out = out + c * (z[:, j] ** 2 - 1.0) + d * z[:, j]
    return out
