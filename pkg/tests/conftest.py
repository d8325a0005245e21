import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from chaoslimits.chaos import ChaosVector
from chaoslimits.tensor import RawTensor, SymTensor, symmetrize

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def oracle():
    return json.loads((DATA / "oracle.json").read_text())


def random_sym(rng, dim, order, scale=1.0) -> SymTensor:
    return symmetrize(RawTensor(scale * rng.normal(size=(dim,) * order), dim))


def random_chaos(rng, dim, max_order, const=0.0, scale=0.5) -> ChaosVector:
    kernels = {p: random_sym(rng, dim, p, scale) for p in range(1, max_order + 1)}
    return ChaosVector(dim, const, kernels)


def oracle_chaos(case) -> ChaosVector:
    d = case["dim"]
    kernels = {
        int(p): SymTensor(np.array(v).reshape((d,) * int(p)), d) for p, v in case["kernels"].items()
    }
    return ChaosVector(d, case["const"], kernels)


def derivatives_at_zero(fn, radius, r_max, nodes=32, degree=16):
    """Derivatives 1..r_max at 0 of a real-line function analytic on |x| < radius.

    Fits a Chebyshev series on [-radius/3, radius/3] and differentiates it.
    """
    h = radius / 3.0
    x = h * np.cos(np.pi * (np.arange(nodes) + 0.5) / nodes)
    y = np.asarray(fn(x))
    out = []
    for part in (y.real, y.imag):
        series = np.polynomial.Chebyshev.fit(x, part, degree, domain=[-h, h])
        out.append([series.deriv(r)(0.0) for r in range(1, r_max + 1)])
    return np.array(out[0]) + 1j * np.array(out[1])


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, ok: bool, detail: str) -> None:
    """Log one acceptance line; it is printed now and again in the run summary."""
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
