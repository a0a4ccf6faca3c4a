"""Fit/predict backends used to impute potential differences.

Three interchangeable backends:

* ``mean``: predicts the training-response mean, ignoring features.
* ``ols``: least squares with an intercept via the normal equations. If the
  Gram matrix is numerically singular (condition estimate above 1e12) a
  small ridge term is added so the fit stays finite; the regularized
  solution tracks the minimum-norm least-squares solution.
* ``forest``: the regression forest from :mod:`ploop.forest` with fixed
  conventional defaults (200 trees, mtry = max(1, p // 3), leaves of at
  least 5 samples, bootstrap resamples of full size).

Fits are deterministic given (backend, data, seed); only the forest
consumes the seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import forest as _forest
from .errors import DataError, RequestError

BACKENDS = ("mean", "ols", "forest")
DEFAULT_BACKEND = "ols"

N_TREES = 200
MIN_LEAF = 5
CONDITION_LIMIT = 1e12
RIDGE_SCALE = 1e-8


@dataclass(frozen=True)
class TrainingSet:
    """A feature matrix with matching responses."""

    features: np.ndarray  # (n, p)
    responses: np.ndarray  # (n,)

    def __post_init__(self) -> None:
        if self.features.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        n = self.features.shape[0]
        if n == 0:
            raise DataError("empty training set")
        if self.responses.shape != (n,):
            raise DataError("responses must match the feature row count")
        if not (np.isfinite(self.features).all() and np.isfinite(self.responses).all()):
            raise DataError("training data must be finite")

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


def _check_query(x: np.ndarray, p: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        if x.shape != (p,):
            raise DataError(f"expected a feature vector of length {p}, got {x.shape}")
    elif x.ndim == 2:
        if x.shape[1] != p:
            raise DataError(f"expected feature rows of length {p}, got {x.shape}")
    else:
        raise DataError("query must be a vector or a matrix")
    if not np.isfinite(x).all():
        raise DataError("query features must be finite")
    return x


@dataclass(frozen=True)
class MeanModel:
    backend = "mean"
    n_features: int
    mean: float

    def predict(self, x):
        x = _check_query(x, self.n_features)
        if x.ndim == 1:
            return self.mean
        return np.full(x.shape[0], self.mean)


@dataclass(frozen=True)
class LinearModel:
    backend = "ols"
    n_features: int
    coef: np.ndarray  # (p + 1,), intercept first
    ridge_fallback: bool

    def predict(self, x):
        x = _check_query(x, self.n_features)
        if x.ndim == 1:
            return float(self.coef[0] + x @ self.coef[1:])
        return self.coef[0] + x @ self.coef[1:]


@dataclass(frozen=True)
class ForestModel:
    backend = "forest"
    n_features: int
    trees: tuple  # node arrays from forest.build_forest

    def predict(self, x):
        x = _check_query(x, self.n_features)
        single = x.ndim == 1
        xq = np.ascontiguousarray(x.reshape(1, -1) if single else x)
        out = _forest.predict_forest(*self.trees, xq)
        return float(out[0]) if single else out


FittedModel = MeanModel | LinearModel | ForestModel


def _fit_ols(X: np.ndarray, y: np.ndarray) -> LinearModel:
    n, p = X.shape
    design = np.hstack([np.ones((n, 1)), X])
    gram = design.T @ design
    rhs = design.T @ y
    eigs = np.linalg.eigvalsh(gram)
    smallest = eigs[0]
    condition = np.inf if smallest <= 0 else eigs[-1] / smallest
    fallback = bool(condition > CONDITION_LIMIT)
    if fallback:
        ridge = RIDGE_SCALE * np.trace(gram) / gram.shape[0]
        gram = gram + ridge * np.eye(gram.shape[0])
    coef = np.linalg.solve(gram, rhs)
    return LinearModel(n_features=p, coef=coef, ridge_fallback=fallback)


def _tree_seeds(seed: int) -> np.ndarray:
    # seed of tree t is a fixed function of (seed, t)
    return np.random.SeedSequence(seed).generate_state(N_TREES, dtype=np.uint64)


def _fit_forest(X: np.ndarray, y: np.ndarray, seed: int) -> ForestModel:
    n, p = X.shape
    mtry = max(1, p // 3)
    trees = _forest.build_forest(
        np.ascontiguousarray(X), np.ascontiguousarray(y), N_TREES, mtry, MIN_LEAF, _tree_seeds(seed)
    )
    return ForestModel(n_features=p, trees=trees)


def fit(backend: str, training: TrainingSet, seed: int = 0) -> FittedModel:
    """Fit the requested backend on the training set."""
    if backend not in BACKENDS:
        raise RequestError(f"unknown backend {backend!r}; choose from {BACKENDS}")
    if seed < 0:
        raise RequestError("seed must be non-negative")
    X = np.asarray(training.features, dtype=np.float64)
    y = np.asarray(training.responses, dtype=np.float64)
    if backend == "mean":
        return MeanModel(n_features=X.shape[1], mean=float(y.mean()))
    if X.shape[1] == 0:
        raise RequestError(f"backend {backend!r} needs at least one feature")
    if backend == "ols":
        return _fit_ols(X, y)
    return _fit_forest(X, y, seed)


def predict(model: FittedModel, x) -> float:
    """Evaluate a fitted model at a feature vector (or matrix of rows)."""
    return model.predict(x)
