import itertools
import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chaoslimits.chaos import ChaosVector, l2_norm
from chaoslimits.criteria import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    PASS_TREND,
    Thresholds,
    cumulant_identity_residual,
    build_polynomial,
    chi_square_check,
    correlated_feasibility_gate,
    elementary_symmetric,
    elementary_symmetric_excluding,
    expansion_coefficients,
    feasibility_gate,
    gamma_combination,
    half_contraction_constant,
    loglog_slope,
    target_check,
    mixed_chaos_stable_stats,
    polynomial_from_weights,
    chi_gauss_kernel_check,
    chi_gauss_index_sets,
    sequence_check,
    stable_kernel_stats,
    sufficient_contraction_check,
)
from chaoslimits.families import fourth_moment_kernel
from chaoslimits.montecarlo import McConfig, evaluate_chaos
from chaoslimits.rng import standard_normals
from chaoslimits.selftest import random_target
from chaoslimits.target import CorrelatedSpec, TargetSpec, to_chaos
from chaoslimits.tensor import (
    RawTensor,
    SymTensor,
    basis_vector,
    contract,
    norm,
    sym_contract,
    symmetrize,
    tensor_power,
)

from conftest import oracle_chaos, random_chaos, random_sym

seeds = st.integers(0, 2**32 - 1)


def I(f):
    return ChaosVector.from_kernel(f)


def spec_from_fraction_key(key):
    a, b, cd = json.loads(key)
    fr = lambda v: float(Fraction(v))  # noqa: E731
    return TargetSpec(fr(a), tuple(map(fr, b)), tuple((fr(c), fr(d)) for c, d in cd))


def unit_block_kernel(n, p):
    """n^{-1/2} sum_{i<=n} e_i^{⊗p} on R^n."""
    out = np.zeros((n,) * p)
    for i in range(n):
        out[(i,) * p] = 1.0 / math.sqrt(n)
    return SymTensor(out, n, check=False)


def chi_square_fixed_point(k, p=4, dim=None):
    """(2/c_p) sum_{i<=k} e_i^{⊗p}: its p/2 self-contraction is (2/c_p) times itself."""
    dim = dim or k
    out = np.zeros((dim,) * p)
    for i in range(k):
        out[(i,) * p] = 2.0 / half_contraction_constant(p)
    return SymTensor(out, dim, check=False)


class TestPolynomial:
    def test_gaussian(self):
        P = build_polynomial(TargetSpec(1.0))
        np.testing.assert_array_equal(P.coeffs, [0.0, 0.0, 1.0])
        assert P.weights[2] == 0.5

    def test_single_chi_square(self):
        P = build_polynomial(TargetSpec(0.0, (1.0,)))
        np.testing.assert_array_equal(P.coeffs, [0.0, -1.0, 1.0])
        assert P.weights[1] == -1.0 and P.weights[2] == 0.5

    def test_symmetric_pair_with_gaussian(self):
        P = build_polynomial(TargetSpec(1.0, (1.0, -1.0)))
        assert P.coeffs[1] == 0.0 and P.coeffs[3] == 0.0
        assert P.weights[2] == -0.5 and P.weights[4] == 0.125

    def test_repeated_roots_flag(self):
        assert build_polynomial(TargetSpec(0.0, (1.0, 1.0))).repeated_roots
        assert not build_polynomial(TargetSpec(0.0, (1.0, 2.0))).repeated_roots

    @given(seeds)
    def test_weights_invert(self, seed):
        X = random_target(np.random.default_rng(seed), gaussian=None)
        P = build_polynomial(X)
        roots = np.sort(polynomial_from_weights(P.weights).real)
        # double roots come back only to about sqrt(eps) accuracy
        np.testing.assert_allclose(roots, np.sort(P.roots), atol=1e-4)

    @given(seeds)
    def test_expansion_matches_polynomial(self, seed):
        X = random_target(np.random.default_rng(seed), gaussian=None)
        np.testing.assert_allclose(expansion_coefficients(X), build_polynomial(X).coeffs, atol=1e-9)


class TestElementarySymmetric:
    def test_empty(self):
        np.testing.assert_array_equal(elementary_symmetric([]), [1.0])

    def test_two_values(self):
        np.testing.assert_allclose(elementary_symmetric([2.0, 3.0]), [1.0, 5.0, 6.0])

    @given(st.lists(st.floats(-3, 3), min_size=0, max_size=6))
    def test_convolution(self, values):
        T = elementary_symmetric(values)
        poly = np.array([1.0])
        for v in values:
            poly = np.convolve(poly, [1.0, -v])
        np.testing.assert_allclose([(-1) ** j * t for j, t in enumerate(T)], poly, atol=1e-9)

    def test_excluding(self):
        np.testing.assert_allclose(elementary_symmetric_excluding([2.0, 3.0, 5.0], 1), [1.0, 7.0, 10.0])


class TestGammaCombination:
    @given(seeds)
    def test_vanishes_on_target(self, seed):
        X = random_target(np.random.default_rng(seed), gaussian=None, repeat_b=seed % 3 == 0)
        assert l2_norm(gamma_combination(to_chaos(X), build_polynomial(X))) <= 1e-8

    def test_chi_square_by_hand(self):
        hh = tensor_power(np.array([0.6, 0.8]), 2)
        P = build_polynomial(TargetSpec(0.0, (1.0,)))
        assert l2_norm(gamma_combination(I(hh), P)) < 1e-15
        assert l2_norm(gamma_combination(I(hh * 2.0), P)) == pytest.approx(2 * math.sqrt(2), rel=1e-14)

    def test_frozen_oracle(self, oracle):
        for case in oracle["chaos"]:
            F = oracle_chaos(case)
            for key, want in case["combination_norms"].items():
                P = build_polynomial(spec_from_fraction_key(key))
                assert l2_norm(gamma_combination(F, P)) == pytest.approx(want, rel=1e-12)

    def test_exact_zero_targets(self, oracle):
        for case in oracle["zero_targets"]:
            assert case["combination_is_zero"]
            X = TargetSpec(case["a"], tuple(case["b"]), tuple(map(tuple, case["cd"])))
            assert l2_norm(gamma_combination(to_chaos(X), build_polynomial(X))) <= 1e-9


class TestMainCheck:
    def test_embedding_passes(self):
        X = TargetSpec(0.5, (1.0,), ((-1.0, 0.5),))
        res = target_check(to_chaos(X), X)
        assert res.verdict == PASS
        assert max(res.kappa_gaps) <= 1e-12 and res.combo_l2 <= 1e-12

    def test_wrong_variance_fails(self):
        res = target_check(I(basis_vector(1, 0)) * 1.1, TargetSpec(1.0))
        assert res.kappa_gaps[1] == pytest.approx(0.21)
        assert res.verdict == FAIL

    def test_kappa_max_extends(self):
        res = target_check(I(fourth_moment_kernel(4)), TargetSpec(1.0), kappa_max=4)
        assert len(res.kappa_gaps) == 4
        assert res.kappa_gaps[3] == pytest.approx(1.5)

    def test_zero_variance_rejected(self):
        with pytest.raises(ValueError):
            target_check(ChaosVector.constant(2, 1.0), TargetSpec(1.0))

    def test_fourth_moment_oracle(self, oracle):
        for case in oracle["fourth_moment"]:
            F = I(fourth_moment_kernel(case["n"]))
            res = target_check(F, TargetSpec(1.0), kappa_max=4)
            assert res.kappa_gaps[3] == pytest.approx(case["kappa4"], rel=1e-12)
            assert res.combo_l2 == pytest.approx(case["combination_norm"], rel=1e-12)

    def test_conditional_estimate_attached(self):
        X = TargetSpec(1.0, (0.5,))
        res = target_check(to_chaos(X), X, mc_config=McConfig(n=2000, seed=1))
        assert res.conditional_l1["value"] == pytest.approx(0.0, abs=1e-12)


class TestSequence:
    NS = (2, 4, 8, 16, 32)

    def test_fourth_moment_trend(self):
        items = [(n, I(fourth_moment_kernel(n))) for n in self.NS]
        rep = sequence_check(items, TargetSpec(1.0), kappa_max=4)
        assert rep.verdict == PASS_TREND
        k4 = [g[3] for g in rep.kappa_gaps]
        assert loglog_slope(self.NS, k4) == pytest.approx(-1.0, abs=1e-12)
        assert rep.slopes["combo_l2"] == pytest.approx(-0.5, abs=1e-12)

    def test_constant_sequence_passes(self):
        X = TargetSpec(1.0, (-0.5,))
        rep = sequence_check([(n, to_chaos(X)) for n in self.NS], X)
        assert rep.verdict == PASS

    def test_slow_decay_is_inconclusive(self):
        X = TargetSpec(1.0)
        items = [(n, I(basis_vector(1, 0)) * (1 + 0.5 * n**-0.1)) for n in self.NS]
        assert sequence_check(items, X).verdict == INCONCLUSIVE

    def test_no_decay_fails(self):
        X = TargetSpec(1.0)
        items = [(n, I(basis_vector(1, 0)) * 1.1) for n in self.NS]
        rep = sequence_check(items, X)
        assert rep.verdict == FAIL and rep.statuses["kappa_gap_2"] == FAIL

    def test_thresholds_respected(self):
        items = [(n, I(fourth_moment_kernel(n))) for n in self.NS]
        # still decaying, but not yet under the stricter trend thresholds
        strict = Thresholds(trend_kappa=0.1, trend_combo=0.01)
        assert sequence_check(items, TargetSpec(1.0), strict, kappa_max=4).verdict == INCONCLUSIVE

    def test_n_must_increase(self):
        X = TargetSpec(1.0)
        with pytest.raises(ValueError):
            sequence_check([(4, to_chaos(X)), (2, to_chaos(X))], X)

    def test_csv_rows_cover_every_n(self):
        items = [(n, I(fourth_moment_kernel(n))) for n in (2, 4)]
        rows = sequence_check(items, TargetSpec(1.0)).csv_rows()
        assert {r[0] for r in rows} == {2, 4}


class TestContractionCriteria:
    def test_constant(self):
        assert half_contraction_constant(4) == 36.0
        assert half_contraction_constant(2) == 2.0
        with pytest.raises(ValueError):
            half_contraction_constant(3)

    def test_fixed_point_combination_vanishes(self):
        f = chi_square_fixed_point(2)
        rep = sufficient_contraction_check(f, TargetSpec(0.0, (1.0,)))
        assert rep["half_iterate_combination"] <= 1e-12
        assert rep["label"] == "sufficient only"

    def test_statistics_match_brute_force(self):
        f = random_sym(np.random.default_rng(3), 3, 4, 0.3)
        X = TargetSpec(0.0, (1.0,))
        rep = sufficient_contraction_check(f, X)
        for l, v in rep["off_half_contractions"].items():
            want = np.linalg.norm(symmetrize(RawTensor(np.tensordot(f.coeffs, f.coeffs, l))).coeffs)
            assert v == pytest.approx(want, rel=1e-12)
        # P(x) = x(x-1): w_1 = -1, w_2 = 1/2
        half = sym_contract(f, f, 2).coeffs
        want = np.linalg.norm(-36.0 * f.coeffs + 0.5 * 36.0**2 * half)
        assert rep["half_iterate_combination"] == pytest.approx(want, rel=1e-12)

    def test_odd_order_rejected(self):
        with pytest.raises(ValueError):
            sufficient_contraction_check(random_sym(np.random.default_rng(0), 2, 3), TargetSpec(1.0))


class TestChiSquare:
    def test_second_chaos_identity(self):
        f = SymTensor(np.eye(3))
        rep = chi_square_check(f, 3)
        assert rep["b2"] == 0.0 and rep["c2"] <= 1e-12
        assert rep["b_pass"] and rep["c_pass"]

    def test_fourth_chaos_fixed_point(self):
        rep = chi_square_check(chi_square_fixed_point(2), 2)
        assert rep["b2"] <= 1e-12 and rep["c2"] <= 1e-12
        assert rep["agree"]

    def test_perturbation_is_seen_on_both_sides(self):
        rng = np.random.default_rng(1)
        f = chi_square_fixed_point(2, dim=3) + random_sym(rng, 3, 4, 1e-3)
        rep = chi_square_check(f, 2)
        assert rep["b2"] > 0 and rep["c2"] > 0
        assert not rep["b_pass"] and not rep["c_pass"]

    def test_b2_matches_direct_norm(self):
        f = random_sym(np.random.default_rng(2), 3, 4, 0.2)
        rep = chi_square_check(f, 1)
        want = np.linalg.norm(sym_contract(f, f, 2).coeffs - f.coeffs / 18.0)
        assert rep["b2"] == pytest.approx(want, rel=1e-12)


class TestChiGaussKernels:
    def test_zero_kernel(self):
        rep = chi_gauss_kernel_check(SymTensor.zeros(2, 4), 0.0, 0.0)
        assert all(v == 0.0 for v in rep["C_l"].values())

    def test_sets_by_brute_force(self):
        p = 4
        for l in range(2, 3 * p - 3, 2):
            A, B = chi_gauss_index_sets(p, l)
            want_A = [
                (s, t)
                for s, t in itertools.product(range(1, p), range(1, p + 1))
                if t <= 2 * p - 2 * s and 3 * p - 2 * s - 2 * t == l
            ]
            want_B = [s for s in range(1, p) if 2 * p - 2 * s == l]
            assert sorted(A) == sorted(want_A)
            assert B == want_B

    @pytest.mark.parametrize("p", [4, 6])
    def test_matches_combination_kernels(self, p):
        # the l-chaos kernel of the Gamma combination for aN + b(xi^2-1) is (p/4) times C_l
        rng = np.random.default_rng(p)
        f = random_sym(rng, 3, p, 0.3)
        for a, b in ((1.0, 0.7), (0.5, -1.2)):
            combo = gamma_combination(I(f), build_polynomial(TargetSpec(a, (b,))))
            rep = chi_gauss_kernel_check(f, a, b)
            for l, v in rep["C_l"].items():
                assert norm(combo.kernel(l)) == pytest.approx(p / 4 * v, rel=1e-9)

    def test_normalisation_gaps(self):
        f = random_sym(np.random.default_rng(0), 2, 4, 0.2)
        rep = chi_gauss_kernel_check(f, 1.0, 0.5)
        assert rep["variance_gap"] == pytest.approx(abs(24 * np.sum(f.coeffs**2) - 1.5))


class TestStable:
    def test_single_direction(self):
        rep = stable_kernel_stats(tensor_power(np.eye(3)[0], 3), basis_vector(3, 0))
        assert rep["self_contraction"] == 1.0

    @pytest.mark.parametrize("n", [2, 4, 8, 16, 32])
    def test_unit_blocks(self, n):
        for p in (2, 3):
            rep = stable_kernel_stats(unit_block_kernel(n, p), basis_vector(n, 0))
            assert rep["self_contraction"] == pytest.approx(n**-0.5, abs=1e-12)

    @pytest.mark.parametrize("n", [2, 4, 8, 16, 32])
    def test_paired_blocks(self, n):
        rep = stable_kernel_stats(fourth_moment_kernel(n), basis_vector(2 * n, 0))
        assert rep["self_contraction"] == pytest.approx(math.sqrt(2) / 4 * n**-0.5, abs=1e-12)

    @given(seeds)
    def test_bound_chain(self, seed):
        rng = np.random.default_rng(seed)
        g = random_sym(rng, 3, int(rng.integers(1, 4)))
        v = rng.normal(size=3)
        rep = stable_kernel_stats(g, SymTensor(v / np.linalg.norm(v)))
        assert rep["bound_holds"]

    def test_direction_must_be_unit(self):
        with pytest.raises(ValueError):
            stable_kernel_stats(basis_vector(2, 0), SymTensor(np.array([2.0, 0.0])))

    def test_single_chaos_collapse(self):
        rng = np.random.default_rng(4)
        g = random_sym(rng, 3, 3)
        f = basis_vector(3, 1)
        rep = mixed_chaos_stable_stats(I(g), f)
        want = 9 * 2 * norm(contract(g, f, 1)) ** 2
        assert rep["cross_term"] == 0.0
        assert rep["statistic"] == pytest.approx(want, rel=1e-12)

    def test_orthogonal_support(self):
        rng = np.random.default_rng(5)
        kernels = {}
        for p in (1, 2, 3):
            arr = np.zeros((3,) * p)
            arr[(slice(1, 3),) * p] = rng.normal(size=(2,) * p)
            kernels[p] = symmetrize(RawTensor(arr))
        rep = mixed_chaos_stable_stats(ChaosVector(3, 0.0, kernels), basis_vector(3, 0))
        assert rep["statistic"] == 0.0

    def test_second_moment_against_directional_derivative(self):
        rng = np.random.default_rng(6)
        F = random_chaos(rng, 3, 3, scale=0.4)
        v = rng.normal(size=3)
        f = SymTensor(v / np.linalg.norm(v))
        rep = mixed_chaos_stable_stats(F, f)
        xi = standard_normals(11, 200_000, 3)
        h = 1e-5
        dF = (evaluate_chaos(F, xi + h * f.coeffs) - evaluate_chaos(F, xi - h * f.coeffs)) / (2 * h)
        est, se = np.mean(dF**2), np.std(dF**2) / math.sqrt(dF.size)
        assert abs(est - rep["derivative_second_moment"]) < 4 * se


class TestFeasibility:
    def test_partition_example(self):
        out = feasibility_gate([1, -2, -1, 4, -5, -2])
        blocks = {tuple(b["indices"]): (b["beta"], b["gamma"]) for b in out["blocks"]}
        assert blocks == {(1, 3): (1, 1), (2, 6): (0, 2), (4,): (1, 0), (5,): (0, 1)}
        assert out["verdict"] == "infeasible"
        assert out["conditions"]["1"]
        assert [4] in out["failing_blocks"]["2"]
        assert out["failed_conditions"] == ["2"]

    @given(st.floats(-5, 5, allow_nan=False))
    def test_symmetric_block(self, t):
        assert feasibility_gate([1, -1], [t, t])["verdict"] == "not-excluded"

    def test_odd_count(self):
        out = feasibility_gate([1], [0])
        assert out["verdict"] == "infeasible" and "1" in out["failed_conditions"]

    def test_unbalanced_d(self):
        out = feasibility_gate([1, -1], [1, 2])
        assert out["failed_conditions"] == ["3"]

    def test_zero_c_entries_ignored(self):
        assert feasibility_gate([1, 0, -1], [1, 5, 1])["m"] == 2

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            feasibility_gate([1, -1], [1])


class TestCorrelatedGate:
    @given(st.floats(0.0, 0.49))
    def test_symmetric_pass(self, s):
        out = correlated_feasibility_gate(CorrelatedSpec(1.0, (1.0, -1.0), (s, s)))
        assert out["verdict"] == "not-excluded"

    def test_unbalanced_signs(self):
        out = correlated_feasibility_gate(CorrelatedSpec(1.0, (1.0, 2.0), (0.1, 0.1)))
        assert out["verdict"] == "infeasible"

    def test_sigma_bound(self):
        out = correlated_feasibility_gate(CorrelatedSpec(1.0, (1.0, -1.0), (0.75, 0.1)))
        assert out["sigma2_positive"] >= 0.5
        assert "4" in out["failed_conditions"]

    def test_non_positive_covariance(self):
        with pytest.raises(ValueError):
            CorrelatedSpec(1.0, (1.0, -1.0), (0.8, 0.8))


class TestCumulantIdentity:
    def test_origin(self):
        assert cumulant_identity_residual(TargetSpec(1.0, (1.0,)), 0.0) == 0.0

    @pytest.mark.parametrize("x", [0.3, 1.0, 2.5])
    def test_simple(self, x):
        assert cumulant_identity_residual(TargetSpec(1.0, (1.0,)), x) <= 1e-8

    @pytest.mark.parametrize("a", [0.0, 1.5])
    def test_repeated_roots(self, a):
        X = TargetSpec(a, (1.0, 1.0), ((0.5, 1.0),))
        assert max(cumulant_identity_residual(X, x) for x in np.linspace(-5, 5, 101)) <= 1e-8

    @given(seeds)
    def test_random(self, seed):
        X = random_target(np.random.default_rng(seed), gaussian=None, repeat_b=seed % 2 == 0)
        assert max(cumulant_identity_residual(X, x) for x in np.linspace(-5, 5, 101)) <= 1e-8

    def test_detects_wrong_cumulants(self, monkeypatch):
        import chaoslimits.criteria as crit

        real = crit.target_cumulants
        monkeypatch.setattr(crit, "target_cumulants", lambda X, r: real(X, r) * 1.01)
        assert cumulant_identity_residual(TargetSpec(1.0, (1.0, -0.5)), 1.0) > 1e-4
