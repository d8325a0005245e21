import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chaoslimits.chaos import ChaosVector
from chaoslimits.codec import (
    SpecError,
    chaos_from_json,
    chaos_to_json,
    correlated_from_json,
    correlated_to_json,
    dumps,
    kernel_from_json,
    kernel_to_json,
    load_json_file,
    target_from_json,
    target_to_json,
)
from chaoslimits.target import CorrelatedSpec, TargetSpec

from conftest import random_chaos, random_sym

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
nonzero = finite.filter(lambda v: abs(v) > 1e-9)


class TestKernels:
    @given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
    def test_round_trip(self, d, p, seed):
        f = random_sym(np.random.default_rng(seed), d, p)
        g = kernel_from_json(json.loads(json.dumps(kernel_to_json(f))))
        assert np.array_equal(f.coeffs, g.coeffs)

    def test_partial_entries_are_symmetrized(self):
        f = kernel_from_json({"dim": 2, "order": 2, "entries": [{"index": [1, 2], "value": 1.0}]})
        np.testing.assert_array_equal(f.coeffs, [[0.0, 0.5], [0.5, 0.0]])

    @pytest.mark.parametrize(
        "obj, fragment",
        [
            ({"dim": 2, "order": 1}, "missing key 'entries'"),
            ({"dim": 2, "order": 1, "entries": [{"index": [3], "value": 1}]}, "exceeds dim"),
            ({"dim": 2, "order": 1, "entries": [{"index": [1, 1], "value": 1}]}, "expected 1 indices"),
            ({"dim": 2, "order": 1, "entries": [{"index": [1], "value": "x"}]}, "expected a number"),
            ({"dim": 0, "order": 1, "entries": []}, "must be >= 1"),
            (
                {"dim": 2, "order": 1, "entries": [{"index": [1], "value": 1}, {"index": [1], "value": 2}]},
                "duplicate index",
            ),
        ],
    )
    def test_errors_name_the_location(self, obj, fragment):
        with pytest.raises(SpecError, match=fragment):
            kernel_from_json(obj, "k")


class TestChaos:
    @given(st.integers(0, 2**32 - 1))
    def test_round_trip(self, seed):
        F = random_chaos(np.random.default_rng(seed), 2, 3, const=0.25)
        G = chaos_from_json(json.loads(dumps(chaos_to_json(F))))
        assert G.const == F.const and set(G.kernels) == set(F.kernels)
        for p in F.kernels:
            assert np.array_equal(F.kernel(p).coeffs, G.kernel(p).coeffs)

    def test_order_key_mismatch(self):
        obj = {"dim": 1, "kernels": {"2": {"dim": 1, "order": 1, "entries": []}}}
        with pytest.raises(SpecError, match="stored under key 2"):
            chaos_from_json(obj)


class TestTargets:
    @given(finite, st.lists(nonzero, max_size=3), st.lists(st.tuples(nonzero, nonzero), max_size=2))
    def test_round_trip(self, a, b, cd):
        if a == 0.0 and not b and not cd:
            return
        X = TargetSpec(a, tuple(b), tuple(cd))
        assert target_from_json(json.loads(dumps(target_to_json(X)))) == X

    def test_unknown_key(self):
        with pytest.raises(SpecError, match="unknown keys"):
            target_from_json({"a": 1, "sigma": 2})

    def test_invalid_spec(self):
        with pytest.raises(SpecError, match="non-zero"):
            target_from_json({"b": [0.0]})

    def test_correlated_round_trip(self):
        Y = CorrelatedSpec(1.5, (1.0, -2.0), (0.1, 0.3))
        assert correlated_from_json(json.loads(dumps(correlated_to_json(Y)))) == Y

    def test_correlated_singular(self):
        with pytest.raises(SpecError, match="positive definite"):
            correlated_from_json({"a0": 1, "lambda": [1, -1], "sigma": [0.8, 0.8]})


class TestFiles:
    def test_syntax_error_has_line_and_column(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{\n  "a": 1,\n  "b": [1, ]\n}\n')
        with pytest.raises(SpecError, match=r"bad.json:3:\d+:"):
            load_json_file(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(SpecError, match="cannot read"):
            load_json_file(tmp_path / "nope.json")

    def test_dumps_rejects_nan(self):
        with pytest.raises(ValueError):
            dumps({"x": float("nan")})

    @given(st.lists(finite, max_size=20))
    def test_floats_round_trip_bit_exact(self, values):
        assert json.loads(dumps(values)) == values

    def test_numpy_values_are_plain(self):
        out = json.loads(dumps({"a": np.float64(0.1), "b": np.arange(3), "c": np.bool_(True)}))
        assert out == {"a": 0.1, "b": [0, 1, 2], "c": True}
