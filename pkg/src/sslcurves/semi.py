"""Semi-supervised fitting: moment constraints, self-learning and soft EM.

The constrained fits rely on two identities that any labeling satisfies for ML
estimates on a fully labeled sample: the count-weighted class means average to
the overall mean, and between-class plus within-class covariance equals the
total covariance (``B + W = T``). With unlabeled data the overall mean and
total covariance can be estimated from more points; the class-dependent
parameters are then adjusted so the identities hold again.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, MissingClass
from .model import (
    LDA,
    NMC,
    GaussianClassifier,
    fit_supervised,
    fit_weighted,
    log_joint,
    log_marginal,
    one_hot,
    posterior,
    predict,
    variance_floor,
)

# eigenvalue floor for W' = T - B', relative to trace(T)/d
PSD_FLOOR = 1e-6

CONSTRAINED_REALIZATION = "mean-translation + W' = T_all - B' (eigenvalue clamp)"


@dataclass(frozen=True, eq=False)
class MomentStats:
    """Label-independent statistics of labeled and unlabeled features pooled."""

    m_all: np.ndarray
    T_all: np.ndarray
    n_total: int


@dataclass(frozen=True, eq=False)
class ScatterDecomposition:
    B: np.ndarray
    W: np.ndarray
    T: np.ndarray


@dataclass(frozen=True)
class SelfLearnTrace:
    iterations: int
    objective_per_iter: tuple
    converged: bool
    label_changes_per_iter: tuple


def _as_matrix(U, d):
    U = np.asarray(U, dtype=float)
    if U.size == 0:
        return np.empty((0, d))
    return np.atleast_2d(U)


def _scatter(Z, center):
    diff = Z - center
    S = diff.T @ diff / Z.shape[0]
    return 0.5 * (S + S.T)


def compute_moments(X, U) -> MomentStats:
    """Overall mean and ML total covariance of labeled and unlabeled features."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Z = np.vstack([X, _as_matrix(U, X.shape[1])])
    if Z.shape[0] == 0:
        raise EmptyInput("no feature vectors to compute moments from")
    m = Z.mean(axis=0)
    return MomentStats(m, _scatter(Z, m), Z.shape[0])


def decompose_scatter(X, y, n_classes: int = 2) -> ScatterDecomposition:
    """Between-, within- and total covariance of a labeled sample."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    counts = np.bincount(y, minlength=n_classes)
    if np.any(counts == 0):
        raise MissingClass(f"classes {np.flatnonzero(counts == 0).tolist()} have no samples")
    n, d = X.shape
    m = X.mean(axis=0)
    B = np.zeros((d, d))
    W = np.zeros((d, d))
    for k in range(n_classes):
        Xk = X[y == k]
        mk = Xk.mean(axis=0)
        off = mk - m
        B += counts[k] / n * np.outer(off, off)
        diff = Xk - mk
        W += diff.T @ diff / n
    return ScatterDecomposition(0.5 * (B + B.T), 0.5 * (W + W.T), _scatter(X, m))


def translate_means(means, weights, m_all):
    """Shift all class means by one vector so their ``weights`` average is ``m_all``."""
    w = np.asarray(weights, dtype=float)
    delta = m_all - (w / w.sum()) @ means
    return means + delta


def psd_clamp(S, eps):
    """Raise eigenvalues below ``eps`` to ``eps``; returns (matrix, number clamped)."""
    vals, vecs = np.linalg.eigh(S)
    low = vals < eps
    if not low.any():
        return S, 0
    vals = np.where(low, eps, vals)
    R = (vecs * vals) @ vecs.T
    return 0.5 * (R + R.T), int(low.sum())


def fit_nmc_constrained(X, y, U, n_classes: int = 2) -> GaussianClassifier:
    """NMC whose means are translated so their count-weighted mean is the overall mean.

    The variance is kept from the supervised fit.
    """
    sup = fit_supervised(NMC, X, y, n_classes)
    report = sup.report.replace(method="constrained", realization=CONSTRAINED_REALIZATION)
    U = _as_matrix(U, sup.dim)
    if U.shape[0] == 0:
        return GaussianClassifier(NMC, sup.priors, sup.means, sup.covariance, report)
    stats = compute_moments(X, U)
    counts = np.bincount(np.asarray(y, dtype=np.int64), minlength=n_classes)
    means = translate_means(sup.means, counts, stats.m_all)
    return GaussianClassifier(NMC, sup.priors, means, sup.covariance, report)


def fit_lda_constrained(X, y, U, n_classes: int = 2) -> GaussianClassifier:
    """LDA with translated means and within-class covariance ``T_all - B'``."""
    sup = fit_supervised(LDA, X, y, n_classes)
    report = sup.report.replace(method="constrained", realization=CONSTRAINED_REALIZATION)
    U = _as_matrix(U, sup.dim)
    if U.shape[0] == 0:
        return GaussianClassifier(LDA, sup.priors, sup.means, sup.covariance, report)
    stats = compute_moments(X, U)
    p = sup.priors
    means = translate_means(sup.means, p, stats.m_all)
    off = means - stats.m_all
    B = (off * p[:, None]).T @ off
    B = 0.5 * (B + B.T)
    W = stats.T_all - B
    d = sup.dim
    scale = float(np.trace(stats.T_all)) / d
    eps = PSD_FLOOR * scale if scale > 0 else variance_floor(X)
    W, n_clamped = psd_clamp(W, eps)
    report = report.replace(ridge=0.0, psd_repaired=n_clamped > 0, n_eigen_clamped=n_clamped)
    return GaussianClassifier(LDA, p, means, W, report)


def fit_constrained(kind, X, y, U, n_classes: int = 2) -> GaussianClassifier:
    if kind == NMC:
        return fit_nmc_constrained(X, y, U, n_classes)
    if kind == LDA:
        return fit_lda_constrained(X, y, U, n_classes)
    raise ValueError(f"unknown classifier kind {kind!r}")


def complete_data_objective(model, X, y, U, pseudo) -> float:
    """Average ``log_joint`` over labeled points and pseudo-labeled unlabeled points."""
    terms = np.asarray(log_joint(model, np.atleast_2d(X), y)).tolist()
    if len(pseudo):
        terms += np.asarray(log_joint(model, U, pseudo)).tolist()
    return math.fsum(terms) / len(terms)


def semi_supervised_objective(model, X, y, U) -> float:
    """Labeled ``log_joint`` plus unlabeled ``log_marginal``, per object."""
    terms = np.asarray(log_joint(model, np.atleast_2d(X), y)).tolist()
    if U.shape[0]:
        terms += np.asarray(log_marginal(model, U)).tolist()
    return math.fsum(terms) / len(terms)


def self_learning_step(kind, X, y, U, model, n_classes: int = 2):
    """One relabel-and-refit pass; returns (new model, pseudo-labels used)."""
    pseudo = np.atleast_1d(predict(model, U))
    Z = np.vstack([X, U])
    labels = np.concatenate([np.asarray(y, dtype=np.int64), pseudo])
    refit = fit_weighted(kind, Z, one_hot(labels, n_classes), method="self_learned")
    return refit, pseudo


def fit_self_learned(kind, X, y, U, max_iter: int = 100, n_classes: int = 2):
    """Self-learning (hard EM): pseudo-label, refit, repeat until labels settle.

    Starts from the supervised fit and warm-starts every pass from the previous
    model. The whole unlabeled pool is relabeled each pass.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    model = fit_supervised(kind, X, y, n_classes)
    U = _as_matrix(U, model.dim)
    if U.shape[0] == 0:
        obj = complete_data_objective(model, X, y, U, [])
        model = GaussianClassifier(
            kind, model.priors, model.means, model.covariance,
            model.report.replace(method="self_learned", objective=(obj,)),
        )
        return model, SelfLearnTrace(1, (obj,), True, (0,))

    objectives, changes = [], []
    labels = None
    converged = False
    for it in range(1, max_iter + 1):
        pseudo = np.atleast_1d(predict(model, U))
        n_changed = U.shape[0] if labels is None else int(np.count_nonzero(pseudo != labels))
        changes.append(n_changed)
        if labels is not None and n_changed == 0:
            # refitting on identical labels reproduces the current model
            objectives.append(objectives[-1])
            converged = True
            break
        labels = pseudo
        model, _ = self_learning_step(kind, X, y, U, model, n_classes)
        objectives.append(complete_data_objective(model, X, y, U, labels))
    model = GaussianClassifier(
        kind, model.priors, model.means, model.covariance,
        model.report.replace(objective=tuple(objectives)),
    )
    return model, SelfLearnTrace(it, tuple(objectives), converged, tuple(changes))


def fit_em_soft(kind, X, y, U, max_iter: int = 100, tol: float = 1e-8, n_classes: int = 2):
    """EM with posterior responsibilities on the unlabeled points.

    Labeled points keep their true label with weight one. Stops when the
    per-object semi-supervised log-likelihood improves by less than ``tol``.
    The objective history is stored on ``model.report.objective``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    model = fit_supervised(kind, X, y, n_classes)
    U = _as_matrix(U, model.dim)
    history = [semi_supervised_objective(model, X, y, U)]
    if U.shape[0] > 0:
        Z = np.vstack([X, U])
        floor = variance_floor(Z)
        R_lab = one_hot(y, n_classes)
        for _ in range(max_iter):
            R = np.vstack([R_lab, np.atleast_2d(posterior(model, U))])
            model = fit_weighted(kind, Z, R, floor=floor, method="em_soft")
            history.append(semi_supervised_objective(model, X, y, U))
            if history[-1] - history[-2] < tol:
                break
    return GaussianClassifier(
        kind, model.priors, model.means, model.covariance,
        model.report.replace(method="em_soft", objective=tuple(history)),
    )
