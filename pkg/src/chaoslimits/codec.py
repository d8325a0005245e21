"""JSON encodings for kernels, chaos vectors and targets.

Kernels use 1-based indices and full-tensor values; missing entries are 0
and the result is symmetrized on load.  Floats are written by the standard
``json`` module, whose ``repr``-based output is the shortest decimal string
that reads back to the same double.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .chaos import ChaosVector
from .target import CorrelatedSpec, TargetSpec
from .tensor import RawTensor, SymTensor, symmetrize

__all__ = [
    "SpecError",
    "kernel_to_json",
    "kernel_from_json",
    "chaos_to_json",
    "chaos_from_json",
    "target_to_json",
    "target_from_json",
    "correlated_to_json",
    "correlated_from_json",
    "dumps",
    "load_json_file",
    "plain",
]


class SpecError(ValueError):
    """Malformed or invalid input, with a location prefix such as ``file:line:col`` or a JSON path."""


def _where(path: str) -> str:
    return path or "<root>"


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecError(f"{_where(path)}: expected a number, got {type(value).__name__}")
    out = float(value)
    if not math.isfinite(out):
        raise SpecError(f"{_where(path)}: value must be finite")
    return out


def _int(value: Any, path: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SpecError(f"{_where(path)}: expected an integer")
    if value < minimum:
        raise SpecError(f"{_where(path)}: must be >= {minimum}")
    return value


def _obj(value: Any, path: str) -> dict:
    if not isinstance(value, dict):
        raise SpecError(f"{_where(path)}: expected an object")
    return value


def _list(value: Any, path: str) -> list:
    if not isinstance(value, list):
        raise SpecError(f"{_where(path)}: expected an array")
    return value


def plain(value: Any) -> Any:
    """Recursively convert numpy scalars/arrays and tuples into JSON-ready Python values."""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        out = float(value)
        if not math.isfinite(out):
            raise ValueError("refusing to serialise a non-finite number")
        return out
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def dumps(obj: Any) -> str:
    return json.dumps(plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def load_json_file(path: str | Path) -> Any:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise SpecError(f"{p}: cannot read file ({exc.strerror})") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{p}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


# ------------------------------------------------------------------ kernels


def kernel_to_json(f: SymTensor) -> dict:
    entries = []
    if f.order == 0:
        entries.append({"index": [], "value": float(f.coeffs)})
    else:
        for idx in zip(*np.nonzero(f.coeffs)):
            entries.append({"index": [int(i) + 1 for i in idx], "value": float(f.coeffs[idx])})
    return {"dim": f.dim, "order": f.order, "entries": entries}


def kernel_from_json(obj: Any, path: str = "") -> SymTensor:
    obj = _obj(obj, path)
    for key in ("dim", "order", "entries"):
        if key not in obj:
            raise SpecError(f"{_where(path)}: missing key '{key}'")
    dim = _int(obj["dim"], f"{path}.dim", 1)
    order = _int(obj["order"], f"{path}.order", 0)
    arr = np.zeros((dim,) * order)
    seen = set()
    for i, entry in enumerate(_list(obj["entries"], f"{path}.entries")):
        ep = f"{path}.entries[{i}]"
        entry = _obj(entry, ep)
        if "index" not in entry or "value" not in entry:
            raise SpecError(f"{ep}: entries need 'index' and 'value'")
        index = _list(entry["index"], f"{ep}.index")
        if len(index) != order:
            raise SpecError(f"{ep}.index: expected {order} indices, got {len(index)}")
        idx = []
        for j, v in enumerate(index):
            k = _int(v, f"{ep}.index[{j}]", 1)
            if k > dim:
                raise SpecError(f"{ep}.index[{j}]: index {k} exceeds dim {dim}")
            idx.append(k - 1)
        key = tuple(idx)
        if key in seen:
            raise SpecError(f"{ep}: duplicate index {[k + 1 for k in idx]}")
        seen.add(key)
        arr[key] = _number(entry["value"], f"{ep}.value")
    return symmetrize(RawTensor(arr, dim))


# ------------------------------------------------------------- chaos vectors


def chaos_to_json(F: ChaosVector) -> dict:
    kernels: dict[str, Any] = {"0": F.const}
    for p, f in F.kernels.items():
        kernels[str(p)] = kernel_to_json(f)
    return {"dim": F.dim, "kernels": kernels}


def chaos_from_json(obj: Any, path: str = "") -> ChaosVector:
    obj = _obj(obj, path)
    if "dim" not in obj or "kernels" not in obj:
        raise SpecError(f"{_where(path)}: chaos vectors need 'dim' and 'kernels'")
    dim = _int(obj["dim"], f"{path}.dim", 1)
    ks = _obj(obj["kernels"], f"{path}.kernels")
    const = 0.0
    kernels = {}
    for key, val in ks.items():
        kp = f"{path}.kernels.{key}"
        try:
            p = int(key)
        except ValueError as exc:
            raise SpecError(f"{kp}: kernel keys must be integers") from exc
        if p < 0:
            raise SpecError(f"{kp}: kernel order must be >= 0")
        if p == 0:
            const = _number(val, kp)
            continue
        f = kernel_from_json(val, kp)
        if f.dim != dim:
            raise SpecError(f"{kp}: kernel dim {f.dim} differs from {dim}")
        if f.order != p:
            raise SpecError(f"{kp}: kernel order {f.order} stored under key {p}")
        kernels[p] = f
    return ChaosVector(dim, const, kernels)


# ------------------------------------------------------------------ targets


def target_to_json(X: TargetSpec) -> dict:
    return {"a": X.a, "b": list(X.b), "cd": [list(p) for p in X.cd]}


def target_from_json(obj: Any, path: str = "") -> TargetSpec:
    obj = _obj(obj, path)
    unknown = set(obj) - {"a", "b", "cd"}
    if unknown:
        raise SpecError(f"{_where(path)}: unknown keys {sorted(unknown)}")
    a = _number(obj.get("a", 0.0), f"{path}.a")
    b = [_number(v, f"{path}.b[{i}]") for i, v in enumerate(_list(obj.get("b", []), f"{path}.b"))]
    cd = []
    for i, pair in enumerate(_list(obj.get("cd", []), f"{path}.cd")):
        pp = f"{path}.cd[{i}]"
        pair = _list(pair, pp)
        if len(pair) != 2:
            raise SpecError(f"{pp}: expected [c, d]")
        cd.append((_number(pair[0], f"{pp}[0]"), _number(pair[1], f"{pp}[1]")))
    try:
        return TargetSpec(a, tuple(b), tuple(cd))
    except ValueError as exc:
        raise SpecError(f"{_where(path)}: {exc}") from exc


def correlated_to_json(Y: CorrelatedSpec) -> dict:
    return {"a0": Y.a0, "lambda": list(Y.lambdas), "sigma": list(Y.sigmas)}


def correlated_from_json(obj: Any, path: str = "") -> CorrelatedSpec:
    obj = _obj(obj, path)
    for key in ("a0", "lambda", "sigma"):
        if key not in obj:
            raise SpecError(f"{_where(path)}: missing key '{key}'")
    a0 = _number(obj["a0"], f"{path}.a0")
    lam = [_number(v, f"{path}.lambda[{i}]") for i, v in enumerate(_list(obj["lambda"], f"{path}.lambda"))]
    sig = [_number(v, f"{path}.sigma[{i}]") for i, v in enumerate(_list(obj["sigma"], f"{path}.sigma"))]
    try:
        return CorrelatedSpec(a0, tuple(lam), tuple(sig))
    except ValueError as exc:
        raise SpecError(f"{_where(path)}: {exc}") from exc
