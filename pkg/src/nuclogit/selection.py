"""Regularization path construction, cross-validation, and deviance evaluation.

The path starts at the smallest penalty that forces an all-zero coefficient
matrix and descends log-uniformly.  Cross-validation uses multinomial deviance
(twice the negative log-likelihood), normalized per observation so results
are comparable across sample sizes, with class-stratified folds and warm
starts along the path within each fold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import Dataset, ModelFit, indicator_matrix, per_observation_nll
from .prox import PenaltyGroups, thin_svd
from .solver import SolverConfig, fit_npmr, fit_null, fit_ridge

DEFAULT_N_LAMBDA = 30
DEFAULT_RATIO_MIN = 1e-3


@dataclass
class LambdaPath:
    """Strictly decreasing grid of penalty levels."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size == 0:
            raise ValueError("path must be a nonempty vector")
        if np.any(self.values < 0):
            raise ValueError("penalty levels must be nonnegative")
        if np.any(np.diff(self.values) >= 0):
            raise ValueError("penalty levels must be strictly decreasing")

    @classmethod
    def from_lambda_max(cls, lambda_max: float,
                        n_lambda: int = DEFAULT_N_LAMBDA,
                        ratio_min: float = DEFAULT_RATIO_MIN) -> "LambdaPath":
        """Log-spaced grid from ``lambda_max`` down to ``lambda_max * ratio_min``."""
        if lambda_max <= 0:
            raise ValueError(f"lambda_max must be positive, got {lambda_max}")
        if not 0 < ratio_min < 1:
            raise ValueError("ratio_min must be in (0, 1)")
        if n_lambda < 1:
            raise ValueError("n_lambda must be positive")
        if n_lambda == 1:
            return cls(np.array([lambda_max]))
        grid = np.logspace(0.0, np.log10(ratio_min), n_lambda) * lambda_max
        return cls(grid)


@dataclass
class CvResult:
    """Cross-validation summary aligned with a penalty grid."""

    lambda_grid: np.ndarray
    mean_deviance: np.ndarray
    se_deviance: np.ndarray
    chosen_lambda: float
    fold_assignments: np.ndarray  # 1-based fold id per observation


def path_lambda_max(dataset: Dataset, groups: Optional[PenaltyGroups] = None) -> float:
    """Smallest penalty at which the fitted coefficient matrix is all zero.

    With B = 0 the optimal intercept is the null model's, so the zero matrix
    is stationary iff the penalty dominates the spectral norm of the
    likelihood gradient block there; grouped penalties take the max over
    their blocks.
    """
    null = fit_null(dataset)
    P = np.exp(null.alpha - _logsumexp(null.alpha))
    G = np.asarray(dataset.X.T @ (indicator_matrix(dataset.y, dataset.K) - P[np.newaxis, :]))
    if groups is None:
        return _spectral_norm(G)
    groups.validate(dataset.p)
    if not groups.groups:
        return 0.0
    return max(_spectral_norm(G[idx]) for idx in groups.groups.values())


def _logsumexp(v: np.ndarray) -> float:
    m = v.max()
    return float(m + np.log(np.exp(v - m).sum()))


def _spectral_norm(M: np.ndarray) -> float:
    sigma = thin_svd(M).sigma
    return float(sigma[0]) if sigma.size else 0.0


def stratified_folds(y: np.ndarray, n_folds: int, seed: int) -> np.ndarray:
    """Deterministic class-stratified fold assignment, values in ``{1..n_folds}``."""
    y = np.asarray(y, dtype=int)
    rng = np.random.default_rng(seed)
    assignments = np.zeros(y.shape[0], dtype=int)
    next_fold = 0  # rotates across classes so remainders spread evenly
    for label in np.unique(y):
        idx = np.flatnonzero(y == label)
        rng.shuffle(idx)
        for j, i in enumerate(idx):
            assignments[i] = (next_fold + j) % n_folds + 1
        next_fold += idx.size
    return assignments


def _fit_for_kind(kind, dataset, config, init):
    if kind == "nuclear":
        return fit_npmr(dataset, config, init=init)
    if kind == "frobenius_squared":
        return fit_ridge(dataset, config, init=init)
    raise ValueError(f"unknown penalty kind: {kind!r}")


def _subset(dataset: Dataset, rows: np.ndarray) -> Dataset:
    return Dataset(
        X=dataset.X[rows],
        y=dataset.y[rows],
        K=dataset.K,
        feature_names=dataset.feature_names,
        class_names=dataset.class_names,
    )


def cross_validate(dataset: Dataset, n_folds: int, path: LambdaPath,
                   penalty_kind: str, seed: int,
                   groups: Optional[PenaltyGroups] = None,
                   fold_assignments: Optional[np.ndarray] = None,
                   solver_options: Optional[dict] = None) -> CvResult:
    """K-fold cross-validation of the deviance along a penalty path.

    Folds are stratified by class; each fold's path is fitted largest
    penalty first, warm-starting every fit from the previous solution.
    Per-observation deviances of held-out data are pooled over folds, so
    ``mean_deviance`` is per observation and ``se_deviance`` is the sample
    standard deviation over observations divided by sqrt(n).  The chosen
    penalty is the largest one whose mean deviance is within one standard
    error of the minimum.
    """
    if n_folds < 2:
        raise ValueError(f"need at least 2 folds, got {n_folds}")
    n = dataset.n
    if fold_assignments is None:
        fold_assignments = stratified_folds(dataset.y, n_folds, seed)
    else:
        fold_assignments = np.asarray(fold_assignments, dtype=int)
        if fold_assignments.shape != (n,):
            raise ValueError("fold_assignments must have one entry per observation")

    for f in range(1, n_folds + 1):
        train_classes = np.unique(dataset.y[fold_assignments != f])
        if train_classes.size != dataset.K:
            raise ValueError(
                f"training part of fold {f} is missing a class; use fewer folds"
            )

    options = dict(solver_options or {})
    grid = path.values
    dev = np.empty((grid.size, n))
    for f in range(1, n_folds + 1):
        test_rows = np.flatnonzero(fold_assignments == f)
        train = _subset(dataset, np.flatnonzero(fold_assignments != f))
        X_test = dataset.X[test_rows]
        y_test = dataset.y[test_rows]
        init = None
        for j, lam in enumerate(grid):
            config = SolverConfig(lam=float(lam), groups=groups, **options)
            fit, _ = _fit_for_kind(penalty_kind, train, config, init)
            init = (fit.alpha, fit.B)
            dev[j, test_rows] = 2.0 * per_observation_nll(fit.alpha, fit.B, X_test, y_test)

    mean_dev = dev.mean(axis=1)
    se_dev = dev.std(axis=1, ddof=1) / np.sqrt(n)
    j_min = int(np.argmin(mean_dev))
    threshold = mean_dev[j_min] + se_dev[j_min]
    chosen_idx = int(np.flatnonzero(mean_dev <= threshold).min())  # largest penalty
    return CvResult(
        lambda_grid=grid.copy(),
        mean_deviance=mean_dev,
        se_deviance=se_dev,
        chosen_lambda=float(grid[chosen_idx]),
        fold_assignments=fold_assignments,
    )


def evaluate(fit: ModelFit, dataset: Dataset):
    """Per-observation deviance of ``dataset`` under ``fit``, with its standard error."""
    d = 2.0 * per_observation_nll(fit.alpha, fit.B, dataset.X, dataset.y)
    se = float(d.std(ddof=1) / np.sqrt(d.size)) if d.size > 1 else 0.0
    return float(d.mean()), se
