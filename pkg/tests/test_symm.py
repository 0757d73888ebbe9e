"""Tests for the symmetric-function engine."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from etacurv import symm
from etacurv.errors import ConeViolationError


def cone_points(n, k, count, rng, margin=0.01):
    """Random points of Gamma_k with a relative distance to the boundary.

    The margin keeps finite-difference oracles valid; G's derivatives blow
    up at the cone boundary.
    """
    out = []
    while len(out) < count:
        lam = rng.standard_normal((8 * count, n)) * 2 + rng.uniform(0.5, 3)
        e = symm.elem_sym_all_batch(lam)
        scale = np.abs(lam).max(axis=1)
        ok = np.ones(len(lam), dtype=bool)
        for j in range(1, k + 1):
            ok &= e[:, j] > margin * scale**j
        out.extend(lam[ok][: count - len(out)])
    return np.asarray(out)


class TestSigma:
    def test_ones_m2(self):
        lam = symm.SpectrumVector((1.0, 1.0, 1.0), k=2)
        assert symm.sigma(lam, 2) == 3.0

    def test_full_product(self):
        lam = symm.SpectrumVector((1.0, 2.0, 3.0), k=3)
        assert symm.sigma(lam, 3) == 6.0

    def test_vs_brute(self):
        lam = symm.SpectrumVector((1.0, 2.0, 3.0), k=2)
        assert symm.sigma(lam, 2) == symm.sigma_brute([1, 2, 3], 2) == 11.0

    def test_sigma_zero(self):
        lam = symm.SpectrumVector((4.0, -1.0), k=1)
        assert symm.sigma(lam, 0) == 1.0

    def test_m_out_of_range(self):
        lam = symm.SpectrumVector((1.0, 2.0), k=1)
        with pytest.raises(ValueError):
            symm.sigma(lam, 3)

    def test_oracle_equivalence_random(self):
        rng = np.random.default_rng(7)
        for n in range(2, 9):
            vals = rng.standard_normal((200, n)) * 3
            e = symm.elem_sym_all_batch(vals)
            for m in range(n + 1):
                brute = np.array([symm.sigma_brute(v, m) for v in vals])
                scale = np.maximum(np.abs(brute), 1.0)
                assert np.all(np.abs(e[:, m] - brute) / scale < 1e-12)


class TestSigmaExcl:
    def test_remove_middle(self):
        lam = symm.SpectrumVector((1.0, 2.0, 3.0), k=1)
        assert symm.sigma_excl(lam, 1, 1) == 4.0

    def test_m_zero(self):
        lam = symm.SpectrumVector((5.0, -2.0, 0.3), k=1)
        assert symm.sigma_excl(lam, 0, 2) == 1.0

    def test_remove_first(self):
        lam = symm.SpectrumVector((5.0, 1.0, 1.0), k=2)
        assert symm.sigma_excl(lam, 2, 0) == 1.0

    def test_index_out_of_range(self):
        lam = symm.SpectrumVector((1.0, 2.0), k=1)
        with pytest.raises(ValueError):
            symm.sigma_excl(lam, 0, 2)

    def test_vs_brute(self):
        rng = np.random.default_rng(8)
        vals = rng.standard_normal(5)
        lam = symm.SpectrumVector(vals, k=2)
        for i in range(5):
            rest = np.delete(vals, i)
            for m in range(5):
                assert symm.sigma_excl(lam, m, i) == pytest.approx(
                    symm.sigma_brute(rest, m), rel=1e-13)


class TestConeMembership:
    def test_positive_orthant(self):
        assert symm.gamma_k_contains(symm.SpectrumVector((1, 1, 1), k=3))

    def test_outside(self):
        assert not symm.gamma_k_contains(
            symm.SpectrumVector((-1, 1, 1), k=2))

    def test_mixed_sign_inside(self):
        assert symm.gamma_k_contains(symm.SpectrumVector((3, 3, -1), k=2))

    def test_margin(self):
        lam = symm.SpectrumVector((1.0, 1.0), k=1)
        assert symm.gamma_k_contains(lam, margin=1.0)
        assert not symm.gamma_k_contains(lam, margin=2.0)

    def test_batch_first_fail(self):
        lam = np.array([[1.0, 1.0, 1.0], [-3.0, 1.0, 1.0], [-1.0, 3.0, 3.0]])
        ok, first = symm.gamma_k_contains_batch(lam, 2)
        assert list(ok) == [True, False, True]
        assert first[1] == 1

    def test_require_raises_with_node(self):
        lam = np.array([[1.0, 1.0], [-2.0, 1.0]])
        with pytest.raises(ConeViolationError) as exc:
            symm.require_cone_batch(lam, 1)
        assert exc.value.node == 1
        assert exc.value.j == 1


class TestEtaSpectrum:
    def test_n2_swap(self):
        es = symm.eta_spectrum_from_kappa([1.0, 1.0])
        assert np.allclose(es.values, [1.0, 1.0])

    def test_sorted_sums(self):
        es = symm.eta_spectrum_from_kappa([1.0, 2.0, 3.0])
        assert np.allclose(es.values, [3.0, 4.0, 5.0])
        # ascending lambda pairs with descending kappa
        assert list(es.permutation) == [2, 1, 0]

    def test_round(self):
        r = 2.0
        es = symm.eta_spectrum_from_kappa(np.full(4, 1 / r))
        assert np.allclose(es.values, 3 / r)

    def test_trace_identity(self):
        rng = np.random.default_rng(9)
        kappa = rng.standard_normal(5)
        es = symm.eta_spectrum_from_kappa(kappa)
        assert es.values.sum() == pytest.approx(4 * kappa.sum(), rel=1e-12)


class TestOperatorCoefficients:
    def test_symmetric_point(self):
        n, k = 4, 2
        co = symm.operator_coefficients(
            symm.SpectrumVector(np.ones(n), k))
        assert co.value == pytest.approx(6.0**0.5, rel=1e-14)
        assert np.allclose(co.gradient, co.gradient[0])

    def test_cone_violation_reports_first_j(self):
        with pytest.raises(ConeViolationError) as exc:
            symm.operator_coefficients(
                symm.SpectrumVector((-1.0, 1.0, 1.0), k=2))
        assert exc.value.j == 2

    def test_gradient_matches_fd(self):
        rng = np.random.default_rng(10)
        for n, k in ((2, 2), (3, 2), (4, 3), (5, 4)):
            for lam in cone_points(n, k, 20, rng):
                co = symm.operator_coefficients(symm.SpectrumVector(lam, k))
                hs = 1e-5 * (1 + np.abs(lam))
                fd = np.empty(n)
                for i in range(n):
                    e = np.zeros(n)
                    e[i] = hs[i]
                    gp = symm.elem_sym_all(lam + e)[k] ** (1 / k)
                    gm = symm.elem_sym_all(lam - e)[k] ** (1 / k)
                    fd[i] = (gp - gm) / (2 * hs[i])
                rel = np.abs(fd - co.gradient).max() / np.abs(fd).max()
                assert rel < 1e-6

    def test_euler_identity(self):
        rng = np.random.default_rng(11)
        for n, k in ((3, 2), (4, 2), (5, 3)):
            for lam in cone_points(n, k, 50, rng, margin=0.0):
                co = symm.operator_coefficients(symm.SpectrumVector(lam, k))
                assert np.dot(co.gradient, lam) == pytest.approx(
                    co.value, rel=1e-10)

    def test_homogeneity(self):
        rng = np.random.default_rng(12)
        for lam in cone_points(4, 3, 30, rng, margin=0.0):
            g1 = symm.operator_coefficients(
                symm.SpectrumVector(lam, 3)).value
            for t in (0.5, 2.0, 7.3):
                gt = symm.operator_coefficients(
                    symm.SpectrumVector(t * lam, 3)).value
                assert gt == pytest.approx(t * g1, rel=1e-10)

    def test_hessian_negative_semidefinite(self):
        rng = np.random.default_rng(13)
        for n, k in ((3, 2), (4, 3), (5, 2)):
            for lam in cone_points(n, k, 30, rng, margin=0.0):
                co = symm.operator_coefficients(symm.SpectrumVector(lam, k))
                ev = np.linalg.eigvalsh(co.hessian)
                assert ev.max() <= 1e-10 * max(1.0, abs(ev.min()))

    def test_midpoint_concavity(self):
        rng = np.random.default_rng(14)
        for n, k in ((3, 2), (4, 3)):
            pts = cone_points(n, k, 60, rng, margin=0.0)
            for a, b in zip(pts[:30], pts[30:]):
                gm = symm.elem_sym_all((a + b) / 2)[k] ** (1 / k)
                ga = symm.elem_sym_all(a)[k] ** (1 / k)
                gb = symm.elem_sym_all(b)[k] ** (1 / k)
                assert gm >= 0.5 * (ga + gb) - 1e-12

    def test_ordering_and_f_coeffs(self):
        rng = np.random.default_rng(15)
        for lam in cone_points(4, 2, 40, rng, margin=0.0):
            lam = np.sort(lam)
            co = symm.operator_coefficients(symm.SpectrumVector(lam, 2))
            # ascending lambda gives nonincreasing G^ii, nondecreasing F^ii
            assert np.all(np.diff(co.gradient) <= 1e-12)
            assert np.all(np.diff(co.f_coeffs) >= -1e-12)
            assert np.allclose(co.f_coeffs,
                               co.gradient.sum() - co.gradient)

    def test_maclaurin(self):
        rng = np.random.default_rng(16)
        import math
        for n, k in ((3, 2), (4, 3), (5, 4)):
            for lam in cone_points(n, k, 30, rng, margin=0.0):
                e = symm.elem_sym_all(lam)
                lhs = (e[k] / math.comb(n, k)) ** (1 / k)
                rhs = (e[k - 1] / math.comb(n, k - 1)) ** (1 / (k - 1))
                assert lhs <= rhs * (1 + 1e-12)

    def test_f22_lower_bound(self):
        rng = np.random.default_rng(17)
        for n, k in ((3, 2), (4, 2), (5, 3)):
            for lam in cone_points(n, k, 30, rng, margin=0.0):
                lam = np.sort(lam)
                co = symm.operator_coefficients(symm.SpectrumVector(lam, k))
                assert co.f_coeffs[1] >= co.f_coeffs.sum() / (n * (n - 1)) \
                    - 1e-12 * co.f_coeffs.sum()

    def test_pair_second_divided_difference(self):
        lam = np.array([1.0, 2.0, 4.0])
        co = symm.operator_coefficients(symm.SpectrumVector(lam, 2))
        expect = (co.gradient[0] - co.gradient[2]) / (lam[0] - lam[2])
        assert co.pair_second(0, 2) == pytest.approx(expect, rel=1e-14)

    def test_pair_second_tie_limit(self):
        # the divided difference must approach the analytic tie limit
        base = np.array([2.0, 2.0, 5.0])
        co0 = symm.operator_coefficients(symm.SpectrumVector(base, 2))
        tie = co0.pair_second(0, 1)
        eps = 1e-6
        lam = base + np.array([0.0, eps, 0.0])
        co1 = symm.operator_coefficients(symm.SpectrumVector(lam, 2))
        assert co1.pair_second(0, 1) == pytest.approx(tie, rel=1e-5)

    def test_pair_second_rejects_diagonal(self):
        co = symm.operator_coefficients(
            symm.SpectrumVector((1.0, 2.0, 3.0), k=2))
        with pytest.raises(ValueError):
            co.pair_second(1, 1)


class TestSpectrumVector:
    def test_bad_k(self):
        with pytest.raises(ValueError):
            symm.SpectrumVector((1.0, 2.0), k=3)

    def test_bad_length(self):
        with pytest.raises(ValueError):
            symm.SpectrumVector((1.0,), k=1)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=2, max_size=8),
       st.integers(0, 8))
def test_sigma_recurrence_matches_enumeration(values, m):
    vals = np.asarray(values)
    if m > vals.size:
        m = vals.size
    got = symm.elem_sym_all(vals)[m]
    want = symm.sigma_brute(vals, m)
    assert abs(got - want) <= 1e-12 * max(1.0, abs(want))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-20, 20), min_size=2, max_size=6))
def test_eta_spectrum_sum_rule(kappa):
    kappa = np.asarray(kappa)
    es = symm.eta_spectrum_from_kappa(kappa)
    n = kappa.size
    assert abs(es.values.sum() - (n - 1) * kappa.sum()) \
        <= 1e-10 * max(1.0, abs(kappa).sum())
    # ascending order
    assert np.all(np.diff(es.values) >= 0)
    # permutation recovers the unsorted spectrum
    unsorted = kappa.sum() - kappa
    assert np.allclose(es.values, unsorted[es.permutation])
