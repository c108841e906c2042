"""Gaussian classifiers with a shared covariance: nearest means (NMC) and LDA.

Both models are parameterized by class priors, class means and a covariance that
is shared by all classes. For the NMC the covariance is ``sigma2 * I`` and the
priors are fixed to ``1/K``; LDA has free priors and a full covariance matrix.
All fits are maximum likelihood, so covariances divide by the (weighted) sample
count rather than ``N - 1``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.special import logsumexp, softmax

from .errors import DimensionMismatch, MissingClass, TooFewPerClass

NMC = "nmc"
LDA = "lda"
KINDS = (NMC, LDA)

LOG_2PI = math.log(2.0 * math.pi)

# NMC variance floor: VARIANCE_FLOOR * (1 + mean squared feature value)
VARIANCE_FLOOR = 1e-8
# LDA ridge: added when min eigenvalue < RIDGE_TRIGGER * trace/d
RIDGE_TRIGGER = 1e-9
RIDGE_SIZE = 1e-6


def _readonly(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """``N`` feature vectors of dimension ``d`` with labels in ``0..K-1``."""

    name: str
    features: np.ndarray
    labels: np.ndarray
    n_classes: int = 2

    def __post_init__(self):
        X = _readonly(self.features)
        y = _readonly(self.labels, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError(f"features must be a non-empty N x d matrix, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise ValueError(f"expected {X.shape[0]} labels, got shape {y.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError(f"{self.name}: non-finite feature values")
        if y.min() < 0 or y.max() >= self.n_classes:
            raise ValueError(f"{self.name}: labels must lie in 0..{self.n_classes - 1}")
        missing = np.setdiff1d(np.arange(self.n_classes), y)
        if missing.size:
            raise MissingClass(f"{self.name}: classes {missing.tolist()} do not occur")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def class_fractions(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes) / self.n


@dataclass(frozen=True)
class FitReport:
    """What happened during a fit besides plain estimation."""

    method: str = "supervised"
    variance_clamped: bool = False
    ridge: float = 0.0
    psd_repaired: bool = False
    n_eigen_clamped: int = 0
    fallback_classes: tuple = ()
    realization: str = ""
    objective: tuple = ()

    def replace(self, **changes) -> "FitReport":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True, eq=False)
class GaussianClassifier:
    """A fitted shared-covariance Gaussian classifier.

    ``covariance`` is a positive float (the NMC's ``sigma2``) or a ``d x d``
    symmetric positive definite matrix for LDA.
    """

    kind: str
    priors: np.ndarray
    means: np.ndarray
    covariance: float | np.ndarray
    report: FitReport = field(default_factory=FitReport)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        priors = _readonly(self.priors)
        means = _readonly(np.atleast_2d(self.means))
        if priors.shape != (means.shape[0],):
            raise ValueError("priors and means disagree on the number of classes")
        if np.any(priors <= 0) or abs(priors.sum() - 1.0) > 1e-12:
            raise ValueError(f"priors must be a positive simplex vector, got {priors}")
        if self.kind == NMC:
            cov = float(self.covariance)
            if not cov > 0:
                raise ValueError("NMC variance must be positive")
        else:
            cov = _readonly(self.covariance)
            d = means.shape[1]
            if cov.shape != (d, d):
                raise ValueError(f"covariance must be {d}x{d}, got {cov.shape}")
        object.__setattr__(self, "priors", priors)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covariance", cov)

    @property
    def n_classes(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @cached_property
    def _chol(self):
        # raises LinAlgError for a non-PD matrix, which would be a fitting bug
        L = cholesky(self.covariance, lower=True)
        return L, 2.0 * float(np.sum(np.log(np.diag(L))))

    def component_logpdf(self, X) -> np.ndarray:
        """``log N(x; m_k, Sigma)`` for every row of ``X`` and every class ``k``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise DimensionMismatch(f"model has dimension {self.dim}, data has {X.shape[1]}")
        out = np.empty((X.shape[0], self.n_classes))
        if self.kind == NMC:
            s2 = self.covariance
            const = self.dim * (LOG_2PI + math.log(s2))
            for k, m in enumerate(self.means):
                diff = X - m
                out[:, k] = -0.5 * (const + np.einsum("ij,ij->i", diff, diff) / s2)
        else:
            L, logdet = self._chol
            const = self.dim * LOG_2PI + logdet
            for k, m in enumerate(self.means):
                z = solve_triangular(L, (X - m).T, lower=True)
                out[:, k] = -0.5 * (const + np.einsum("ij,ij->j", z, z))
        return out

    def joint_logpdf(self, X) -> np.ndarray:
        return self.component_logpdf(X) + np.log(self.priors)


def _point_or_rows(x, values):
    return values[0] if np.ndim(x) == 1 else values


def log_joint(model: GaussianClassifier, x, y):
    """``log pi_y + log N(x; m_y, Sigma)`` in nats, for one point or a batch."""
    J = model.joint_logpdf(x)
    y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    if y.size == 1 and J.shape[0] > 1:
        y = np.full(J.shape[0], y[0])
    return _point_or_rows(x, J[np.arange(J.shape[0]), y])


def log_marginal(model: GaussianClassifier, x):
    """``log sum_k pi_k N(x; m_k, Sigma)`` computed with a max shift."""
    return _point_or_rows(x, logsumexp(model.joint_logpdf(x), axis=1))


def posterior(model: GaussianClassifier, x) -> np.ndarray:
    return _point_or_rows(x, softmax(model.joint_logpdf(x), axis=1))


def predict(model: GaussianClassifier, x):
    # argmax returns the first maximum, so ties go to the lowest class index
    return _point_or_rows(x, np.argmax(model.joint_logpdf(x), axis=1))


@dataclass(frozen=True)
class EvalResult:
    error_rate: float
    avg_joint_loglik: float
    avg_marginal_loglik: float
    n_eval: int


def evaluate(model: GaussianClassifier, eval_set: Dataset) -> EvalResult:
    """Error rate and per-object log-likelihoods of ``model`` on ``eval_set``."""
    X, y = eval_set.features, eval_set.labels
    if X.shape[1] != model.dim:
        raise DimensionMismatch(f"model has dimension {model.dim}, eval set has {X.shape[1]}")
    J = model.joint_logpdf(X)
    n = X.shape[0]
    errors = int(np.count_nonzero(np.argmax(J, axis=1) != y))
    # fsum is exactly rounded, hence independent of summation order
    joint = math.fsum(J[np.arange(n), y].tolist()) / n
    marginal = math.fsum(logsumexp(J, axis=1).tolist()) / n
    return EvalResult(errors / n, joint, marginal, n)


# ---------------------------------------------------------------- fitting


def one_hot(y, n_classes: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    R = np.zeros((y.shape[0], n_classes))
    R[np.arange(y.shape[0]), y] = 1.0
    return R


def variance_floor(X) -> float:
    X = np.asarray(X, dtype=float)
    return VARIANCE_FLOOR * (1.0 + float(np.mean(X * X)))


def ridge_repair(W, floor: float):
    """Add ``lambda * I`` to a pooled covariance that is close to singular.

    Returns the repaired matrix and the ridge that was added (0 when untouched).
    ``floor`` is used as the scale when ``W`` has zero trace.
    """
    d = W.shape[0]
    scale = float(np.trace(W)) / d
    if not scale > 0:
        scale = floor
    if np.linalg.eigvalsh(W)[0] >= RIDGE_TRIGGER * scale:
        return W, 0.0
    lam = RIDGE_SIZE * scale
    return W + lam * np.eye(d), lam


def _as_features(X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch(f"expected an N x d feature matrix, got shape {X.shape}")
    return X


def class_means(X, R):
    """Responsibility-weighted class means; ``R`` is ``N x K``."""
    Nk = R.sum(axis=0)
    return (R.T @ X) / Nk[:, None], Nk


def fit_weighted(kind: str, X, R, floor: float | None = None, method="supervised") -> GaussianClassifier:
    """Maximum-likelihood fit from soft (or hard) class responsibilities.

    Every class needs positive total weight. NMC keeps equal priors and a shared
    spherical variance; LDA gets free priors and a shared full covariance.
    """
    X = np.asarray(X, dtype=float)
    R = np.asarray(R, dtype=float)
    K = R.shape[1]
    means, Nk = class_means(X, R)
    if np.any(Nk <= 0):
        raise MissingClass(f"classes {np.flatnonzero(Nk <= 0).tolist()} have no samples")
    total = float(Nk.sum())
    if floor is None:
        floor = variance_floor(X)
    if kind == NMC:
        resid = 0.0
        for k in range(K):
            diff = X - means[k]
            resid += float(R[:, k] @ np.einsum("ij,ij->i", diff, diff))
        s2 = resid / (total * X.shape[1])
        clamped = s2 < floor
        return GaussianClassifier(
            NMC, np.full(K, 1.0 / K), means, max(s2, floor),
            FitReport(method=method, variance_clamped=bool(clamped)),
        )
    if kind == LDA:
        d = X.shape[1]
        W = np.zeros((d, d))
        for k in range(K):
            diff = X - means[k]
            W += (diff * R[:, k, None]).T @ diff
        W /= total
        W = 0.5 * (W + W.T)
        W, lam = ridge_repair(W, floor)
        priors = Nk / total
        priors = priors / priors.sum()
        return GaussianClassifier(LDA, priors, means, W, FitReport(method=method, ridge=lam))
    raise ValueError(f"unknown classifier kind {kind!r}")


def fit_nmc_supervised(X, y, n_classes: int = 2) -> GaussianClassifier:
    """Equal priors, per-class means and a pooled spherical variance."""
    X = _as_features(X)
    counts = np.bincount(np.asarray(y, dtype=np.int64), minlength=n_classes)
    if np.any(counts == 0):
        raise MissingClass(f"classes {np.flatnonzero(counts == 0).tolist()} have no labeled samples")
    return fit_weighted(NMC, X, one_hot(y, n_classes))


def fit_lda_supervised(X, y, n_classes: int = 2) -> GaussianClassifier:
    """Class-frequency priors, class means, prior-weighted pooled ML covariance."""
    X = _as_features(X)
    counts = np.bincount(np.asarray(y, dtype=np.int64), minlength=n_classes)
    if np.any(counts == 0):
        raise MissingClass(f"classes {np.flatnonzero(counts == 0).tolist()} have no labeled samples")
    if np.any(counts < 2):
        raise TooFewPerClass(f"LDA needs at least 2 samples per class, got counts {counts.tolist()}")
    return fit_weighted(LDA, X, one_hot(y, n_classes))


def fit_supervised(kind: str, X, y, n_classes: int = 2) -> GaussianClassifier:
    if kind == NMC:
        return fit_nmc_supervised(X, y, n_classes)
    if kind == LDA:
        return fit_lda_supervised(X, y, n_classes)
    raise ValueError(f"unknown classifier kind {kind!r}")
