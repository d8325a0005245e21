"""Command-line front end.

Exit codes: 0 pass / not excluded, 2 fail / infeasible, 3 inconclusive,
1 for input errors.  Reports go to ``--out DIR`` and/or stdout; diagnostics
go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .chaos import ChaosVector, cumulants
from .codec import (
    SpecError,
    chaos_from_json,
    correlated_from_json,
    dumps,
    kernel_from_json,
    load_json_file,
    target_from_json,
    target_to_json,
)
from .criteria import (
    FAIL,
    INCONCLUSIVE,
    Thresholds,
    correlated_feasibility_gate,
    feasibility_gate,
    sequence_check,
)
from .families import FAMILIES, get_family
from .montecarlo import McConfig, empirical_cf, empirical_cumulants, joint_stable_functionals
from .selftest import run_suites
from .target import from_correlated, target_cf, target_cumulants, canonicalize
from .tensor import basis_vector

EXIT_OK, EXIT_INPUT, EXIT_FAIL, EXIT_INCONCLUSIVE = 0, 1, 2, 3


class InputError(Exception):
    pass


def _floats(text: str, flag: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"{flag}: expected comma-separated numbers, got '{text}'") from exc


def _ints(text: str, flag: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"{flag}: expected comma-separated integers, got '{text}'") from exc


def _pairs(text: str, flag: str) -> list[tuple[float, float]]:
    out = []
    for item in text.split(";"):
        if not item.strip():
            continue
        vals = _floats(item, flag)
        if len(vals) != 2:
            raise InputError(f"{flag}: expected 't1,t2' pairs separated by ';', got '{item}'")
        out.append((vals[0], vals[1]))
    return out


def _config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _meta(command: str, config: dict, seed: int | None) -> dict:
    return {
        "command": command,
        "version": __version__,
        "seed": seed,
        "config_hash": _config_hash(config),
    }


def _csv_text(rows: Sequence[Sequence], header: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _emit(args, name: str, payload: dict, rows: Sequence[Sequence] | None, header=None) -> None:
    text_json = dumps(payload)
    text_csv = _csv_text(rows, header) if rows is not None else None
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.json").write_text(text_json)
        if text_csv is not None:
            (out / f"{name}.csv").write_text(text_csv)
        print(f"wrote {out / (name + '.json')}", file=sys.stderr)
    if args.stdout or not args.out:
        if args.format == "csv" and text_csv is not None:
            sys.stdout.write(text_csv)
        else:
            sys.stdout.write(text_json)


def _mc_config(args) -> McConfig:
    kw = {"n": args.mc_n, "seed": args.seed, "workers": args.workers, "bins": args.bins}
    if getattr(args, "x_grid", None):
        kw["x_grid"] = tuple(_floats(args.x_grid, "--x-grid"))
    if getattr(args, "t_grid", None):
        kw["t_grid"] = tuple(_pairs(args.t_grid, "--t-grid"))
    try:
        return McConfig(**kw)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


# ------------------------------------------------------------------ check


def _load_sequence(path: str) -> list[tuple[int, ChaosVector]]:
    data = load_json_file(path)
    items = data.get("sequence") if isinstance(data, dict) else data
    if not isinstance(items, list) or not items:
        raise SpecError(f"{path}: expected a non-empty list under 'sequence'")
    out = []
    for i, item in enumerate(items):
        where = f"{path}: sequence[{i}]"
        if not isinstance(item, dict) or "n" not in item or "chaos" not in item:
            raise SpecError(f"{where}: entries need 'n' and 'chaos'")
        n = item["n"]
        if isinstance(n, bool) or not isinstance(n, int) or n < 1:
            raise SpecError(f"{where}.n: expected a positive integer")
        out.append((n, chaos_from_json(item["chaos"], f"{where}.chaos")))
    ns = [n for n, _ in out]
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise SpecError(f"{path}: n values must be strictly increasing, got {ns}")
    return out


def cmd_check(args) -> int:
    if bool(args.sequence) == bool(args.family):
        raise InputError("give exactly one of --sequence FILE or --family NAME")
    target = None
    if args.target:
        target = target_from_json(load_json_file(args.target), args.target)
    kappa_max = args.kappa_max
    if args.family:
        try:
            fam = get_family(args.family)
        except KeyError as exc:
            raise InputError(str(exc.args[0])) from exc
        target = target or fam.default_target
        if target is None:
            raise InputError(f"family '{fam.name}' needs --target")
        ns = _ints(args.n, "--n")
        if not ns or any(b <= a for a, b in zip(ns, ns[1:])) or ns[0] < 1:
            raise InputError("--n: need strictly increasing positive integers")
        items = [(n, fam.build(n, target)) for n in ns]
        if kappa_max is None:
            kappa_max = fam.kappa_max
        source = {"family": fam.name, "n": ns}
    else:
        if target is None:
            raise InputError("--sequence needs --target")
        items = _load_sequence(args.sequence)
        source = {"sequence_sha256": hashlib.sha256(Path(args.sequence).read_bytes()).hexdigest()}
    th = Thresholds(
        kappa=args.threshold_kappa,
        combo=args.threshold_combo,
        trend_kappa=args.trend_threshold_kappa,
        trend_combo=args.trend_threshold_combo,
        slope=args.trend_slope,
    )
    mc = _mc_config(args) if args.conditional else None
    report = sequence_check(items, target, th, kappa_max=kappa_max, mc_config=mc)
    config = {
        "source": source,
        "target": target_to_json(target),
        "thresholds": th.as_dict(),
        "kappa_max": kappa_max,
        "mc": mc.as_dict() if mc else None,
    }
    report.meta = _meta("check", config, args.seed if mc else None)
    payload = report.to_dict()
    payload["target"] = target_to_json(target)
    _emit(args, "report", payload, report.csv_rows(), ["n", "statistic", "value"])
    print(f"verdict: {report.verdict}", file=sys.stderr)
    if report.verdict == FAIL:
        return EXIT_FAIL
    if report.verdict == INCONCLUSIVE:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


# ----------------------------------------------------------- canonicalize


def cmd_canonicalize(args) -> int:
    if args.input:
        data = load_json_file(args.input)
        if not isinstance(data, dict) or "f1" not in data or "f2" not in data:
            raise SpecError(f"{args.input}: expected an object with 'f1' and 'f2' kernels")
        f1 = kernel_from_json(data["f1"], f"{args.input}: f1")
        f2 = kernel_from_json(data["f2"], f"{args.input}: f2")
    elif args.f1 and args.f2:
        f1 = kernel_from_json(load_json_file(args.f1), args.f1)
        f2 = kernel_from_json(load_json_file(args.f2), args.f2)
    else:
        raise InputError("give --input FILE or both --f1 FILE and --f2 FILE")
    if f1.order != 1 or f2.order != 2:
        raise InputError("f1 must have order 1 and f2 order 2")
    try:
        X = canonicalize(f1, f2)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    F = ChaosVector(f1.dim, 0.0, {1: f1, 2: f2})
    kc = cumulants(F, 6)
    kt = target_cumulants(X, 6)
    table = [{"r": r, "target": kt[r - 1], "chaos": kc[r - 1]} for r in range(2, 7)]
    payload = {"target": target_to_json(X), "cumulants": table}
    rows = [(t["r"], t["target"], t["chaos"]) for t in table]
    _emit(args, "canonical", payload, rows, ["r", "target", "chaos"])
    return EXIT_OK


# ------------------------------------------------------------ feasibility


def cmd_feasibility(args) -> int:
    if args.correlated:
        Y = correlated_from_json(load_json_file(args.correlated), args.correlated)
        verdict = correlated_feasibility_gate(Y)
        verdict["input"] = {"a0": Y.a0, "lambda": list(Y.lambdas), "sigma": list(Y.sigmas)}
    elif args.c:
        c = _floats(args.c, "--c")
        d = _floats(args.d, "--d") if args.d else None
        if d is not None and len(d) != len(c):
            raise InputError("--c and --d must have equal length")
        verdict = feasibility_gate(c, d)
        verdict["input"] = {"c": c, "d": d if d is not None else [0.0] * len(c)}
    else:
        raise InputError("give --c LIST [--d LIST] or --correlated FILE")
    _emit(args, "feasibility", verdict, None)
    failed = verdict["failed_conditions"]
    msg = verdict["verdict"]
    if failed:
        blocks = verdict["failing_blocks"]
        detail = [f"condition {k}" + (f" blocks {blocks[k]}" if blocks.get(k) else "") for k in failed]
        msg += " (" + "; ".join(detail) + ")"
    print(msg, file=sys.stderr)
    return EXIT_OK if not failed else EXIT_FAIL


# --------------------------------------------------------------- simulate


def cmd_simulate(args) -> int:
    if bool(args.target) == bool(args.chaos):
        raise InputError("give exactly one of --target FILE or --chaos FILE")
    cfg = _mc_config(args)
    X = None
    if args.target:
        X = target_from_json(load_json_file(args.target), args.target)
        from .target import to_chaos

        F = to_chaos(X)
    else:
        F = chaos_from_json(load_json_file(args.chaos), args.chaos)
    r_max = args.kappa_max or 4
    if not 1 <= r_max <= 6:
        raise InputError("--kappa-max must lie in 1..6 for simulation")
    exact = cumulants(F, r_max)
    est = empirical_cumulants(F, r_max, cfg)
    cum_rows = [
        {
            "r": r,
            "exact": float(exact[r - 1]),
            "estimate": est[r - 1].value,
            "stderr": est[r - 1].stderr,
        }
        for r in range(1, r_max + 1)
    ]
    cf = empirical_cf(F, None, cfg)
    cf_rows = [{"x": float(x), "estimate": [v.real, v.imag]} for x, v in zip(cf["x"], cf["value"])]
    payload = {"cumulants": cum_rows, "cf": cf_rows, "cf_radius": cf["radius"]}
    if X is not None:
        exact_cf = target_cf(X, cf["x"])
        for row, v in zip(cf_rows, exact_cf):
            row["exact"] = [float(v.real), float(v.imag)]
        payload["cf_sup_gap"] = float(np.max(np.abs(cf["value"] - exact_cf)))
        payload["target"] = target_to_json(X)
    if args.direction is not None:
        if not 1 <= args.direction <= F.dim:
            raise InputError(f"--direction must lie in 1..{F.dim}")
        f = basis_vector(F.dim, args.direction - 1)
        payload["stable_functionals"] = joint_stable_functionals(F, f, None, cfg, target=X)
    config = {"mc": cfg.as_dict(), "kappa_max": r_max, "direction": args.direction}
    config["input"] = payload.get("target") or {
        "chaos_sha256": hashlib.sha256(Path(args.chaos).read_bytes()).hexdigest()
    }
    payload["meta"] = _meta("simulate", config, cfg.seed)
    rows = [(f"kappa_{c['r']}", c["exact"], c["estimate"], c["stderr"]) for c in cum_rows]
    _emit(args, "simulation", payload, rows, ["statistic", "exact", "estimate", "stderr"])
    return EXIT_OK


# --------------------------------------------------------------- selftest


def cmd_selftest(args) -> int:
    try:
        results = run_suites(args.seeds)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    for res in results:
        print(res.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


# ----------------------------------------------------------------- parser


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", metavar="DIR", help="write report files into DIR")
    p.add_argument("--format", choices=["json", "csv"], default="json", help="stdout format")
    p.add_argument("--stdout", action="store_true", help="print the report even when --out is set")


def _add_mc(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mc-n", type=int, default=100_000, help="Monte Carlo sample count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bins", type=int, default=64, help="quantile bins for conditional estimates")
    p.add_argument("--workers", type=int, default=1, help="sampling threads (results do not depend on it)")
    p.add_argument("--x-grid", help="comma-separated CF grid")
    p.add_argument("--t-grid", help="'t1,t2;t1,t2;...' grid for the stable functionals")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chaoslimits", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="cumulant and Gamma-combination diagnostics for a sequence")
    p.add_argument("--target", metavar="FILE", help="TargetSpec JSON")
    p.add_argument("--sequence", metavar="FILE", help="JSON with a list of {n, chaos}")
    p.add_argument("--family", choices=sorted(FAMILIES), help="built-in sequence")
    p.add_argument("--n", default="2,4,8,16,32", help="n values for --family")
    p.add_argument("--kappa-max", type=int, help="report cumulant gaps up to this order")
    p.add_argument("--threshold-kappa", type=float, default=1e-6)
    p.add_argument("--threshold-combo", type=float, default=1e-6)
    p.add_argument("--trend-threshold-kappa", type=float, default=0.25)
    p.add_argument("--trend-threshold-combo", type=float, default=0.25)
    p.add_argument("--trend-slope", type=float, default=-0.25)
    p.add_argument("--conditional", action="store_true", help="add the Monte Carlo conditional L1 estimate")
    _add_mc(p)
    _add_output(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("canonicalize", help="law-equivalent TargetSpec of I_1(f1) + I_2(f2)")
    p.add_argument("--input", metavar="FILE", help="JSON object with 'f1' and 'f2' kernels")
    p.add_argument("--f1", metavar="FILE")
    p.add_argument("--f2", metavar="FILE")
    _add_output(p)
    p.set_defaults(func=cmd_canonicalize)

    p = sub.add_parser("feasibility", help="necessary conditions for odd-chaos limits")
    p.add_argument("--c", help="comma-separated c values")
    p.add_argument("--d", help="comma-separated d values (default all 0)")
    p.add_argument("--correlated", metavar="FILE", help="CorrelatedSpec JSON")
    _add_output(p)
    p.set_defaults(func=cmd_feasibility)

    p = sub.add_parser("simulate", help="Monte Carlo cumulants and characteristic function")
    p.add_argument("--target", metavar="FILE")
    p.add_argument("--chaos", metavar="FILE")
    p.add_argument("--kappa-max", type=int)
    p.add_argument("--direction", type=int, help="1-based basis index f = e_i for the stable functionals")
    _add_mc(p)
    _add_output(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("selftest", help="run the identity suites")
    p.add_argument("--seeds", type=int, default=20)
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (InputError, SpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
