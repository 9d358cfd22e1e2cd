"""One-vs-rest Common Spatial Patterns and a pooled-covariance LDA classifier."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_labels, check_trials

LOG_FLOOR = np.log(1e-12)
LDA_SHRINKAGE = 0.1


@dataclass
class CspModel:
    """``filters[k]`` is the ``(2m, channels)`` filter bank of class ``k`` versus the rest.

    Rows are sorted by decreasing eigenvalue: ``m`` largest first, then the
    ``m`` smallest. ``eigenvalues[k]`` holds the full ascending spectrum.
    """

    filters: list
    eigenvalues: list
    m: int
    classes: np.ndarray


def normalized_covariance(trial) -> np.ndarray:
    x = np.asarray(trial, dtype=np.float64)
    c = x @ x.T
    tr = np.trace(c)
    return c / tr if tr > 0 else c


def _class_covariance(trials) -> np.ndarray:
    return np.mean([normalized_covariance(t) for t in trials], axis=0)


def csp_pair(cov_a, cov_b, m: int):
    """Solve ``cov_a w = lambda (cov_a + cov_b) w`` and keep the extreme ``m`` on each side."""
    composite = cov_a + cov_b
    n = composite.shape[0]
    try:
        evals, evecs = linalg.eigh(cov_a, composite)
    except linalg.LinAlgError:
        eps = 1e-6 * np.trace(composite) / n
        evals, evecs = linalg.eigh(cov_a, composite + eps * np.eye(n))
    order = np.r_[np.arange(n - 1, n - 1 - m, -1), np.arange(m)]
    return evecs[:, order].T, evals


def csp_fit(trials, labels, m: int = 2) -> CspModel:
    """Fit one CSP filter bank per class (one-vs-rest).

    Parameters
    ----------
    trials : array, shape (n_trials, n_channels, n_samples)
    labels : array of int
    m : int
        Filters kept from each end of the eigen-spectrum.
    """
    X = check_trials(trials)
    y = check_labels(labels, len(X))
    classes = np.unique(y)
    if len(classes) < 2:
        raise ValueError("CSP needs at least 2 classes")
    if m < 1 or 2 * m > X.shape[1]:
        raise ValueError("need 1 <= m and 2m <= n_channels")
    covs = np.stack([normalized_covariance(t) for t in X])
    filters, evals = [], []
    for k in classes:
        if np.sum(y == k) < 2:
            raise ValueError("class %d has fewer than 2 trials" % k)
        w, e = csp_pair(covs[y == k].mean(axis=0), covs[y != k].mean(axis=0), m)
        filters.append(w)
        evals.append(e)
    return CspModel(filters, evals, m, classes)


def csp_features(model: CspModel, trial) -> np.ndarray:
    """Log relative variance of every filtered signal, concatenated over the one-vs-rest banks."""
    x = np.asarray(trial, dtype=np.float64)
    if x.shape[0] != model.filters[0].shape[1]:
        raise ValueError("channel mismatch: model has %d channels, trial has %d"
                         % (model.filters[0].shape[1], x.shape[0]))
    feats = []
    for w in model.filters:
        var = np.var(w @ x, axis=1)
        total = var.sum()
        rel = var / total if total > 0 else np.zeros_like(var)
        with np.errstate(divide="ignore"):
            feats.append(np.where(rel > 1e-12, np.log(np.maximum(rel, 1e-300)), LOG_FLOOR))
    return np.concatenate(feats)


@dataclass
class LdaModel:
    means: np.ndarray       # (n_classes, dim)
    cov_inv: np.ndarray     # (dim, dim)
    priors: np.ndarray      # (n_classes,)
    classes: np.ndarray
    shrinkage: float = 0.0

    def scores(self, F) -> np.ndarray:
        F = np.atleast_2d(np.asarray(F, dtype=np.float64))
        proj = self.means @ self.cov_inv                    # (k, dim)
        const = -0.5 * np.sum(proj * self.means, axis=1) + np.log(self.priors)
        return F @ proj.T + const


def lda_fit(features, labels, shrinkage: float = LDA_SHRINKAGE) -> LdaModel:
    """Gaussian classifier with a shared (pooled) covariance.

    The covariance is shrunk toward its diagonal by ``shrinkage`` only when
    there are fewer than ``dim + 1`` samples or it is not positive definite.
    """
    F = np.asarray(features, dtype=np.float64)
    y = check_labels(labels, len(F))
    classes = np.unique(y)
    if len(classes) < 2:
        raise ValueError("LDA needs at least 2 classes")
    n, d = F.shape
    means = np.stack([F[y == k].mean(axis=0) for k in classes])
    centred = F - means[np.searchsorted(classes, y)]
    cov = centred.T @ centred / max(n - len(classes), 1)
    gamma = 0.0
    if n < d + 1 or not _is_pd(cov):
        gamma = shrinkage
        cov = (1 - gamma) * cov + gamma * np.diag(np.diag(cov))
        if not _is_pd(cov):
            cov = cov + 1e-10 * max(np.trace(cov) / d, 1.0) * np.eye(d)
    priors = np.array([np.mean(y == k) for k in classes])
    return LdaModel(means, linalg.inv(cov), priors, classes, gamma)


def _is_pd(a) -> bool:
    try:
        np.linalg.cholesky(a)
        return True
    except np.linalg.LinAlgError:
        return False


def lda_predict(model: LdaModel, features) -> np.ndarray | int:
    """Arg-max discriminant score (first class on ties)."""
    F = np.asarray(features, dtype=np.float64)
    pred = model.classes[np.argmax(model.scores(F), axis=1)]
    return int(pred[0]) if F.ndim == 1 else pred


# ---------------------------------------------------------------------------
# Estimators

class CSP(TransformerMixin, BaseEstimator):
    """One-vs-rest CSP log-variance features for ``(n_trials, n_channels, n_samples)`` input."""

    def __init__(self, m=2):
        self.m = m

    def fit(self, X, y):
        self.model_ = csp_fit(X, y, self.m)
        self.classes_ = self.model_.classes
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        X = check_trials(X)
        return np.stack([csp_features(self.model_, t) for t in X])


class LDA(ClassifierMixin, BaseEstimator):
    def __init__(self, shrinkage=LDA_SHRINKAGE):
        self.shrinkage = shrinkage

    def fit(self, X, y):
        self.model_ = lda_fit(X, y, self.shrinkage)
        self.classes_ = self.model_.classes
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return self.model_.scores(X)

    def predict(self, X):
        check_is_fitted(self, "model_")
        return lda_predict(self.model_, np.atleast_2d(X))
