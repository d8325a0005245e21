"""Symmetric kernels over H = R^d and their contraction algebra.

Kernels are stored as dense numpy arrays in the full-tensor convention: a
symmetric kernel of order p carries a value for every index tuple, so
``f.coeffs[i, j] == f.coeffs[j, i]`` and so on.  Symmetrization and the
lossless multiset view both go through a cached orbit map that groups the
flat positions of a ``(d,) * p`` array by their sorted index tuple.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

__all__ = [
    "RawTensor",
    "SymTensor",
    "symmetrize",
    "contract",
    "sym_contract",
    "iter_contract_half",
    "inner",
    "norm",
    "basis_vector",
    "tensor_power",
    "sym_outer",
    "orbit_count",
]


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.setflags(write=False)
    return out


class RawTensor:
    """Order-p array over R^d with no symmetry constraint."""

    __slots__ = ("dim", "order", "coeffs")

    def __init__(self, coeffs, dim: int | None = None):
        arr = _frozen(coeffs)
        order = arr.ndim
        if order == 0:
            if dim is None:
                raise ValueError("dim is required for order-0 tensors")
        else:
            if len(set(arr.shape)) != 1:
                raise ValueError(f"all axes must share one length, got shape {arr.shape}")
            if dim is not None and arr.shape[0] != dim:
                raise ValueError(f"axis length {arr.shape[0]} does not match dim {dim}")
            dim = arr.shape[0]
        if dim < 1:
            raise ValueError("dim must be >= 1")
        if not np.all(np.isfinite(arr)):
            raise ValueError("tensor entries must be finite")
        self.dim = int(dim)
        self.order = int(order)
        self.coeffs = arr

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dim={self.dim}, order={self.order})"


class SymTensor(RawTensor):
    """Symmetric kernel f in the p-th symmetric tensor power of R^d.

    The constructor checks symmetry; use :func:`symmetrize` to build one from
    an arbitrary array.
    """

    __slots__ = ()

    def __init__(self, coeffs, dim: int | None = None, *, check: bool = True):
        super().__init__(coeffs, dim)
        if check and self.order >= 2:
            arr = self.coeffs
            scale = max(1.0, float(np.max(np.abs(arr))))
            for axes in _generator_perms(self.order):
                if not np.allclose(arr, np.transpose(arr, axes), rtol=1e-10, atol=1e-12 * scale):
                    raise ValueError("coefficients are not symmetric; call symmetrize() first")

    @classmethod
    def zeros(cls, dim: int, order: int) -> "SymTensor":
        return cls(np.zeros((dim,) * order), dim, check=False)

    @classmethod
    def scalar(cls, value: float, dim: int) -> "SymTensor":
        return cls(np.asarray(float(value)), dim, check=False)

    def to_multiset(self) -> tuple[np.ndarray, np.ndarray]:
        """Compressed view: one row per sorted index tuple and its coefficient."""
        if self.order == 0:
            return np.zeros((1, 0), dtype=int), self.coeffs.reshape(1).copy()
        orb = _orbits(self.dim, self.order)
        flat = self.coeffs.ravel()
        first = orb.perm[orb.starts]
        idx = np.stack(np.unravel_index(orb.keys, (self.dim,) * self.order), axis=1)
        return idx, flat[first].copy()

    @classmethod
    def from_multiset(cls, dim: int, order: int, indices, values) -> "SymTensor":
        """Inverse of :meth:`to_multiset`; indices may be given in any order within a row."""
        out = np.zeros((dim,) * order)
        if order == 0:
            out[()] = float(np.sum(values))
            return cls(out, dim, check=False)
        orb = _orbits(dim, order)
        idx = np.sort(np.asarray(indices, dtype=int).reshape(-1, order), axis=1)
        keys = np.ravel_multi_index(tuple(idx.T), (dim,) * order)
        pos = np.searchsorted(orb.keys, keys)
        group_vals = np.zeros(orb.keys.size)
        group_vals[pos] = np.asarray(values, dtype=float)
        return cls(group_vals[orb.inverse].reshape(out.shape), dim, check=False)

    def __add__(self, other: "SymTensor") -> "SymTensor":
        _check_same(self, other)
        return SymTensor(self.coeffs + other.coeffs, self.dim, check=False)

    def __sub__(self, other: "SymTensor") -> "SymTensor":
        _check_same(self, other)
        return SymTensor(self.coeffs - other.coeffs, self.dim, check=False)

    def __mul__(self, scale: float) -> "SymTensor":
        return SymTensor(self.coeffs * float(scale), self.dim, check=False)

    __rmul__ = __mul__

    def __neg__(self) -> "SymTensor":
        return SymTensor(-self.coeffs, self.dim, check=False)

    def __truediv__(self, scale: float) -> "SymTensor":
        return SymTensor(self.coeffs / float(scale), self.dim, check=False)

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)


def _check_same(f: RawTensor, g: RawTensor) -> None:
    if f.dim != g.dim:
        raise ValueError(f"dimension mismatch: {f.dim} vs {g.dim}")
    if f.order != g.order:
        raise ValueError(f"order mismatch: {f.order} vs {g.order}")


def _generator_perms(order: int):
    # adjacent transpositions generate the symmetric group
    for k in range(order - 1):
        axes = list(range(order))
        axes[k], axes[k + 1] = axes[k + 1], axes[k]
        yield tuple(axes)


class _Orbits:
    __slots__ = ("keys", "inverse", "counts", "perm", "starts")

    def __init__(self, keys, inverse, counts, perm, starts):
        self.keys = keys
        self.inverse = inverse
        self.counts = counts
        self.perm = perm
        self.starts = starts


@lru_cache(maxsize=128)
def _orbits(dim: int, order: int) -> _Orbits:
    shape = (dim,) * order
    idx = np.indices(shape).reshape(order, -1)
    key = np.ravel_multi_index(tuple(np.sort(idx, axis=0)), shape)
    keys, inverse, counts = np.unique(key, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    perm = np.argsort(inverse, kind="stable")
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    for arr in (keys, inverse, counts, perm, starts):
        arr.setflags(write=False)
    return _Orbits(keys, inverse, counts, perm, starts)


def orbit_count(dim: int, order: int) -> int:
    """Number of distinct coefficients of a symmetric kernel, C(d+p-1, p)."""
    return math.comb(dim + order - 1, order)


def symmetrize(t: RawTensor | np.ndarray, dim: int | None = None) -> SymTensor:
    """Average t over all permutations of its axes.

    Each coefficient is replaced by the mean over its index orbit, which is
    the same as (1/p!) times the sum over permuted copies.  Input that is
    already exactly symmetric is returned unchanged, bit for bit.
    """
    if not isinstance(t, RawTensor):
        t = RawTensor(t, dim)
    if t.order <= 1:
        return SymTensor(t.coeffs, t.dim, check=False)
    orb = _orbits(t.dim, t.order)
    vals = t.coeffs.ravel()[orb.perm]
    lo = np.minimum.reduceat(vals, orb.starts)
    hi = np.maximum.reduceat(vals, orb.starts)
    if np.array_equal(lo, hi):
        return SymTensor(t.coeffs, t.dim, check=False)
    means = np.add.reduceat(vals, orb.starts) / orb.counts
    return SymTensor(means[orb.inverse].reshape(t.coeffs.shape), t.dim, check=False)


def contract(f: RawTensor, g: RawTensor, r: int) -> RawTensor:
    """f contracted with g over r slots: the last r axes of each are summed.

    ``r = 0`` gives the plain tensor product.
    """
    if f.dim != g.dim:
        raise ValueError(f"dimension mismatch: {f.dim} vs {g.dim}")
    p, q = f.order, g.order
    if r < 0 or r > min(p, q):
        raise ValueError(f"contraction index r={r} outside [0, min({p}, {q})]")
    if r == 0:
        return RawTensor(np.multiply.outer(f.coeffs, g.coeffs), f.dim)
    axes = (list(range(p - r, p)), list(range(q - r, q)))
    return RawTensor(np.tensordot(f.coeffs, g.coeffs, axes=axes), f.dim)


def sym_contract(f: RawTensor, g: RawTensor, r: int) -> SymTensor:
    """Symmetrized contraction f ⊗̃_r g."""
    return symmetrize(contract(f, g, r))


def iter_contract_half(f: SymTensor, r: int) -> SymTensor:
    """r-fold iterated half contraction of f with itself.

    r = 1 returns f; each further step contracts the previous result with f
    over p/2 slots and symmetrizes.
    """
    if f.order % 2:
        raise ValueError(f"half contraction needs an even order, got {f.order}")
    if r < 1:
        raise ValueError("r must be >= 1")
    half = f.order // 2
    out = f
    for _ in range(r - 1):
        out = sym_contract(out, f, half)
    return out


def inner(f: RawTensor, g: RawTensor) -> float:
    """Full-tensor Euclidean inner product."""
    _check_same(f, g)
    return float(np.dot(f.coeffs.ravel(), g.coeffs.ravel()))


def norm(f: RawTensor) -> float:
    return math.sqrt(max(inner(f, f), 0.0))


def basis_vector(dim: int, i: int) -> SymTensor:
    """Unit vector e_i (0-based) as an order-1 kernel."""
    if not 0 <= i < dim:
        raise ValueError(f"basis index {i} outside [0, {dim})")
    v = np.zeros(dim)
    v[i] = 1.0
    return SymTensor(v, dim, check=False)


def tensor_power(v: RawTensor | np.ndarray, p: int) -> SymTensor:
    """v ⊗ ... ⊗ v (p factors), symmetric by construction."""
    vec = v.coeffs if isinstance(v, RawTensor) else np.asarray(v, dtype=float)
    out = np.asarray(1.0)
    for _ in range(p):
        out = np.multiply.outer(out, vec)
    return SymTensor(out, vec.shape[0], check=False)


def sym_outer(*vectors) -> SymTensor:
    """Symmetrized tensor product of order-1 kernels or plain vectors."""
    if not vectors:
        raise ValueError("need at least one factor")
    arrs = [v.coeffs if isinstance(v, RawTensor) else np.asarray(v, dtype=float) for v in vectors]
    out = arrs[0]
    for a in arrs[1:]:
        out = np.multiply.outer(out, a)
    return symmetrize(RawTensor(out))
