import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sslcurves.errors import EmptyInput, MissingClass
from sslcurves.model import LDA, NMC, fit_lda_supervised, fit_nmc_supervised, posterior
from sslcurves.semi import (
    compute_moments,
    decompose_scatter,
    fit_em_soft,
    fit_lda_constrained,
    fit_nmc_constrained,
    fit_self_learned,
    self_learning_step,
    semi_supervised_objective,
    translate_means,
)

from .conftest import random_labeled


def col(*v):
    return np.array(v, dtype=float)[:, None]


def same_params(a, b, tol):
    return (
        np.max(np.abs(a.priors - b.priors)) <= tol
        and np.max(np.abs(a.means - b.means)) <= tol
        and np.max(np.abs(np.asarray(a.covariance) - np.asarray(b.covariance))) <= tol
    )


class TestMoments:
    def test_empty_unlabeled_gives_labeled_mean(self, rng):
        X = rng.normal(size=(7, 3))
        st_ = compute_moments(X, np.empty((0, 3)))
        np.testing.assert_array_equal(st_.m_all, X.mean(axis=0))
        assert st_.n_total == 7

    def test_hand_example(self):
        st_ = compute_moments(col(-1.0), col(1.0))
        assert st_.m_all[0] == 0.0
        assert st_.T_all[0, 0] == 1.0

    def test_duplication_invariance(self, rng):
        X, U = rng.normal(size=(5, 3)), rng.normal(size=(9, 3))
        a = compute_moments(X, U)
        b = compute_moments(np.vstack([X, X]), np.vstack([U, U]))
        np.testing.assert_allclose(a.m_all, b.m_all, rtol=0, atol=1e-12)
        np.testing.assert_allclose(a.T_all, b.T_all, rtol=0, atol=1e-12)

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            compute_moments(np.empty((0, 2)), np.empty((0, 2)))

    def test_psd(self, rng):
        st_ = compute_moments(rng.normal(size=(3, 6)), rng.normal(size=(2, 6)))
        T = st_.T_all
        assert np.max(np.abs(T - T.T)) <= 1e-10
        assert np.linalg.eigvalsh(T)[0] >= -1e-10 * np.trace(T)


class TestScatter:
    def test_hand_example(self):
        sc = decompose_scatter(col(0, 2, 4, 6), [0, 0, 1, 1])
        assert sc.W[0, 0] == pytest.approx(1.0, abs=1e-15)
        assert sc.B[0, 0] == pytest.approx(4.0, abs=1e-15)
        assert sc.T[0, 0] == pytest.approx(5.0, abs=1e-15)

    def test_equal_means(self):
        sc = decompose_scatter(col(-1, 1, -2, 2), [0, 0, 1, 1])
        assert sc.B[0, 0] == 0.0
        assert sc.W[0, 0] == pytest.approx(sc.T[0, 0], abs=1e-15)

    def test_single_sample_per_class(self, rng):
        X = rng.normal(size=(2, 3))
        sc = decompose_scatter(X, [0, 1])
        np.testing.assert_array_equal(sc.W, np.zeros((3, 3)))
        np.testing.assert_allclose(sc.B, sc.T, atol=1e-15)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.integers(2, 30))
    def test_identity(self, seed, d, n):
        rng = np.random.default_rng(seed)
        X, y = random_labeled(rng, max(n, 2), d)
        X = X * 10.0 ** rng.integers(-3, 4)
        sc = decompose_scatter(X, y)
        scale = max(np.max(np.abs(sc.T)), 1e-300)
        assert np.max(np.abs(sc.B + sc.W - sc.T)) <= 1e-9 * scale

    def test_missing_class(self):
        with pytest.raises(MissingClass):
            decompose_scatter(col(1, 2), [0, 0])


class TestConstrainedNMC:
    def test_empty_unlabeled_is_supervised(self, rng):
        X, y = random_labeled(rng, 6, 3)
        sup = fit_nmc_supervised(X, y)
        con = fit_nmc_constrained(X, y, np.empty((0, 3)))
        assert same_params(sup, con, 1e-12)

    def test_hand_example(self):
        # union {-1, 1, 1, 1} has mean 0.5
        m = fit_nmc_constrained(col(-1, 1), [0, 1], col(1, 1))
        np.testing.assert_allclose(m.means[:, 0], [-0.5, 1.5], atol=1e-15)
        assert m.covariance == fit_nmc_supervised(col(-1, 1), [0, 1]).covariance

    def test_second_shift_is_identity(self, rng):
        X, y = random_labeled(rng, 8, 2)
        U = rng.normal(size=(20, 2)) + 1
        m = fit_nmc_constrained(X, y, U)
        counts = np.bincount(y, minlength=2)
        again = translate_means(m.means, counts, compute_moments(X, U).m_all)
        np.testing.assert_allclose(again, m.means, rtol=0, atol=1e-12)
        assert same_params(m, fit_nmc_constrained(X, y, U), 0.0)

    def test_mean_constraint(self, rng):
        for _ in range(50):
            X, y = random_labeled(rng, int(rng.integers(2, 12)), 3)
            U = rng.normal(size=(int(rng.integers(1, 50)), 3)) * 3 + 2
            m = fit_nmc_constrained(X, y, U)
            w = np.bincount(y, minlength=2) / len(y)
            m_all = compute_moments(X, U).m_all
            assert np.linalg.norm(m_all - w @ m.means) / (1 + np.linalg.norm(m_all)) <= 1e-10


class TestConstrainedLDA:
    def test_empty_unlabeled_is_supervised(self, rng):
        X, y = random_labeled(rng, 12, 3, min_per_class=2)
        sup = fit_lda_supervised(X, y)
        con = fit_lda_constrained(X, y, np.empty((0, 3)))
        assert same_params(sup, con, 1e-12)
        sc = decompose_scatter(X, y)
        np.testing.assert_allclose(sc.T - sc.B, sup.covariance, rtol=0, atol=1e-10)

    def test_hand_example(self):
        X = col(0, 2, 4, 6)
        a = math.sqrt(11.0)
        U = col(3 - a, 3 + a)
        stats = compute_moments(X, U)
        assert stats.m_all[0] == pytest.approx(3.0, abs=1e-14)
        assert stats.T_all[0, 0] == pytest.approx(7.0, abs=1e-14)
        m = fit_lda_constrained(X, [0, 0, 1, 1], U)
        np.testing.assert_allclose(m.means[:, 0], [1.0, 5.0], atol=1e-14)
        # B' = 4, so W' = 7 - 4
        assert m.covariance[0, 0] == pytest.approx(3.0, abs=1e-13)
        assert not m.report.psd_repaired

    def test_residuals(self, rng):
        checked = 0
        for _ in range(100):
            d = int(rng.integers(1, 5))
            X, y = random_labeled(rng, int(rng.integers(4, 20)), d, min_per_class=2)
            U = rng.normal(size=(int(rng.integers(1, 60)), d)) * 2 - 1
            m = fit_lda_constrained(X, y, U)
            stats = compute_moments(X, U)
            res1 = np.linalg.norm(stats.m_all - m.priors @ m.means) / (1 + np.linalg.norm(stats.m_all))
            assert res1 <= 1e-10
            W = m.covariance
            assert np.max(np.abs(W - W.T)) <= 1e-10 * np.max(np.abs(W))
            assert np.linalg.eigvalsh(W)[0] > 0
            if not m.report.psd_repaired:
                off = m.means - stats.m_all
                B = (off * m.priors[:, None]).T @ off
                T = stats.T_all
                assert np.max(np.abs(B + W - T)) / (1 + np.max(np.abs(T))) <= 1e-9
                checked += 1
        assert checked > 50

    def test_indefinite_difference_is_repaired(self):
        # unlabeled points collapse the total covariance below the between-class part
        X = col(-10, -9, 9, 10)
        U = np.zeros((200, 1))
        m = fit_lda_constrained(X, [0, 0, 1, 1], U)
        assert m.report.psd_repaired and m.report.n_eigen_clamped == 1
        assert m.covariance[0, 0] > 0
        assert "T_all - B'" in m.report.realization


class TestSelfLearning:
    def test_empty_unlabeled(self, rng):
        X, y = random_labeled(rng, 6, 2)
        m, trace = fit_self_learned(NMC, X, y, np.empty((0, 2)))
        assert same_params(m, fit_nmc_supervised(X, y), 1e-12)
        assert trace.iterations == 1 and trace.converged

    def test_hand_example(self):
        X, y = col(-1, 1), np.array([0, 1])
        U = col(-2, -1.5, 1.5, 2)
        m, trace = fit_self_learned(NMC, X, y, U)
        np.testing.assert_allclose(m.means[:, 0], [-1.5, 1.5], atol=1e-15)
        assert trace.converged and trace.iterations == 2
        assert trace.label_changes_per_iter == (4, 0)
        _, pseudo = self_learning_step(NMC, X, y, U, m)
        np.testing.assert_array_equal(pseudo, [0, 0, 1, 1])

    def test_max_iter_respected(self, rng):
        X, y = random_labeled(rng, 4, 2)
        U = rng.normal(size=(200, 2)) * 3
        _, trace = fit_self_learned(NMC, X, y, U, max_iter=1)
        assert trace.iterations == 1
        with pytest.raises(ValueError):
            fit_self_learned(NMC, X, y, U, max_iter=0)

    @pytest.mark.parametrize("kind", [NMC, LDA])
    def test_objective_monotone_and_fixed_point(self, kind):
        rng = np.random.default_rng(7 if kind == NMC else 8)
        n_runs = 1000 if kind == NMC else 300
        for _ in range(n_runs):
            d = int(rng.integers(1, 4))
            X, y = random_labeled(rng, int(rng.integers(4, 12)), d, min_per_class=2)
            U = rng.normal(size=(int(rng.integers(1, 40)), d)) * 2
            m, trace = fit_self_learned(kind, X, y, U, max_iter=100)
            obj = trace.objective_per_iter
            assert all(b >= a - 1e-10 for a, b in zip(obj, obj[1:]))
            assert trace.iterations <= 100
            if trace.converged:
                again, _ = self_learning_step(kind, X, y, U, m)
                assert same_params(again, m, 1e-10)


class TestSoftEM:
    @pytest.mark.parametrize("kind", [NMC, LDA])
    def test_empty_unlabeled(self, rng, kind):
        X, y = random_labeled(rng, 8, 2, min_per_class=2)
        sup = fit_nmc_supervised(X, y) if kind == NMC else fit_lda_supervised(X, y)
        assert same_params(fit_em_soft(kind, X, y, np.empty((0, 2))), sup, 1e-12)

    def test_equidistant_responsibilities(self):
        m = fit_nmc_supervised(col(-1, 1), [0, 1])
        np.testing.assert_allclose(posterior(m, np.array([0.0])), [0.5, 0.5], atol=1e-15)

    @pytest.mark.parametrize("kind", [NMC, LDA])
    def test_ascent(self, kind):
        rng = np.random.default_rng(11)
        for _ in range(100):
            d = int(rng.integers(1, 4))
            X, y = random_labeled(rng, int(rng.integers(4, 12)), d, min_per_class=2)
            U = rng.normal(size=(int(rng.integers(1, 60)), d)) * 2
            sup = fit_nmc_supervised(X, y) if kind == NMC else fit_lda_supervised(X, y)
            m = fit_em_soft(kind, X, y, U, max_iter=200, tol=1e-10)
            hist = m.report.objective
            assert all(b >= a - 1e-9 for a, b in zip(hist, hist[1:]))
            assert semi_supervised_objective(m, X, y, U) >= semi_supervised_objective(sup, X, y, U) - 1e-9
            # NMC keeps its parameter restrictions through the M-step
            if kind == NMC:
                np.testing.assert_array_equal(m.priors, [0.5, 0.5])

    def test_bad_tol(self, rng):
        X, y = random_labeled(rng, 4, 1)
        with pytest.raises(ValueError):
            fit_em_soft(NMC, X, y, col(1), tol=0)
