"""Multinomial logistic model: data container, probabilities, likelihood, gradient.

The model assigns P(Y_i = k | x_i) = exp(a_k + x_i.b_k) / sum_l exp(a_l + x_i.b_l),
with an intercept vector ``alpha`` of length K and a coefficient matrix ``B`` of
shape (p, K).  Everything here is a pure function of its inputs; all solvers in
this package minimize the *negative* log-likelihood, so :func:`gradient` returns
the gradient of that quantity (descent direction is its negation).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy import sparse

Matrix = Union[np.ndarray, sparse.spmatrix]


def _is_sparse(X) -> bool:
    return sparse.issparse(X)


def _check_finite_matrix(X: Matrix, name: str) -> None:
    data = X.data if _is_sparse(X) else X
    if not np.all(np.isfinite(data)):
        raise ValueError(f"{name} contains non-finite entries")


@dataclass
class Dataset:
    """Design matrix plus categorical response.

    Parameters
    ----------
    X : ndarray or scipy sparse matrix, shape (n, p)
        Design matrix.  One-hot dominated designs should be passed sparse
        (CSR); all downstream products exploit sparsity.
    y : ndarray of int, shape (n,)
        Class labels, each in ``{1..K}``.
    K : int
        Number of classes (at least 2).
    feature_names : sequence of str, length p
    class_names : sequence of str, length K
    """

    X: Matrix
    y: np.ndarray
    K: int
    feature_names: Sequence[str]
    class_names: Sequence[str]

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=int)
        n, p = self.X.shape
        if n < 1 or p < 1:
            raise ValueError(f"design matrix must be nonempty, got shape {(n, p)}")
        if self.K < 2:
            raise ValueError(f"need at least 2 classes, got K={self.K}")
        if self.y.shape != (n,):
            raise ValueError(f"y has shape {self.y.shape}, expected ({n},)")
        if self.y.min() < 1 or self.y.max() > self.K:
            raise ValueError(f"labels must lie in 1..{self.K}")
        if len(self.feature_names) != p:
            raise ValueError("feature_names length does not match p")
        if len(self.class_names) != self.K:
            raise ValueError("class_names length does not match K")
        if len(set(self.feature_names)) != p:
            raise ValueError("feature_names contains duplicates")
        if len(set(self.class_names)) != self.K:
            raise ValueError("class_names contains duplicates")
        _check_finite_matrix(self.X, "X")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass
class ModelFit:
    """A fitted multinomial model plus diagnostics.

    ``alpha`` has mean zero and every penalized row block of ``B`` has
    zero row means (the identifiability normalization applied after
    convergence).  ``objective_trace`` holds the objective at the initial
    point followed by each accepted iterate, and is non-increasing.
    """

    alpha: np.ndarray
    B: np.ndarray
    objective_trace: np.ndarray
    final_rank: int
    lam: float
    penalty_kind: str  # "nuclear" | "frobenius_squared" | "none"
    per_group_rank: dict = field(default_factory=dict)


def _linear_predictor(alpha: np.ndarray, B: np.ndarray, X: Matrix) -> np.ndarray:
    eta = X @ B
    if _is_sparse(eta):  # sparse @ sparse, not expected but cheap to handle
        eta = eta.toarray()
    return np.asarray(eta) + alpha[np.newaxis, :]


def _softmax_rows(eta: np.ndarray) -> np.ndarray:
    # max subtraction guards against overflow for any finite eta
    m = eta.max(axis=1, keepdims=True)
    E = np.exp(eta - m)
    return E / E.sum(axis=1, keepdims=True)


def _check_predict_args(alpha: np.ndarray, B: np.ndarray, X: Matrix):
    alpha = np.asarray(alpha, dtype=float)
    B = np.asarray(B, dtype=float)
    if alpha.ndim != 1 or B.ndim != 2:
        raise ValueError("alpha must be a vector and B a matrix")
    if B.shape[1] != alpha.shape[0]:
        raise ValueError(
            f"B has {B.shape[1]} columns but alpha has length {alpha.shape[0]}"
        )
    if X.shape[1] != B.shape[0]:
        raise ValueError(f"X has {X.shape[1]} columns but B has {B.shape[0]} rows")
    if not np.all(np.isfinite(alpha)):
        raise ValueError("alpha contains non-finite entries")
    if not np.all(np.isfinite(B)):
        raise ValueError("B contains non-finite entries")
    _check_finite_matrix(X, "X")
    return alpha, B


def predict_probabilities(alpha: np.ndarray, B: np.ndarray, X: Matrix) -> np.ndarray:
    """Fitted class probabilities, shape (n, K).

    Rows sum to one; the softmax is computed with a per-row max
    subtraction so no overflow occurs for any finite inputs.
    """
    alpha, B = _check_predict_args(alpha, B, X)
    return _softmax_rows(_linear_predictor(alpha, B, X))


def indicator_matrix(y: np.ndarray, K: int) -> np.ndarray:
    """One-hot response matrix, shape (n, K), from labels in ``{1..K}``."""
    y = np.asarray(y, dtype=int)
    if y.size and (y.min() < 1 or y.max() > K):
        raise ValueError(f"labels must lie in 1..{K}")
    Y = np.zeros((y.shape[0], K))
    Y[np.arange(y.shape[0]), y - 1] = 1.0
    return Y


def _nll_terms(eta: np.ndarray, y: np.ndarray):
    """Per-row (logsumexp, exp(eta - max)) for the likelihood and probabilities."""
    m = eta.max(axis=1, keepdims=True)
    E = np.exp(eta - m)
    S = E.sum(axis=1, keepdims=True)
    lse = (m + np.log(S)).ravel()
    per_obs = lse - eta[np.arange(eta.shape[0]), y - 1]
    return per_obs, E / S


def nll_and_probabilities(alpha, B, X, y):
    """Total negative log-likelihood and the probability matrix, in one pass.

    No argument validation; this is the solver's inner-loop workhorse.
    """
    per_obs, P = _nll_terms(_linear_predictor(alpha, B, X), y)
    return float(per_obs.sum()), P


def per_observation_nll(alpha: np.ndarray, B: np.ndarray, X: Matrix, y: np.ndarray) -> np.ndarray:
    """-log P(y_i | x_i) for each observation, via log-sum-exp (never log of P)."""
    per_obs, _ = _nll_terms(_linear_predictor(alpha, B, X), np.asarray(y, dtype=int))
    return per_obs


def negative_log_likelihood(alpha: np.ndarray, B: np.ndarray, dataset: Dataset) -> float:
    """Negative multinomial log-likelihood of ``dataset`` under (alpha, B)."""
    alpha, B = _check_predict_args(alpha, B, dataset.X)
    return float(per_observation_nll(alpha, B, dataset.X, dataset.y).sum())


def gradient(alpha: np.ndarray, B: np.ndarray, dataset: Dataset):
    """Gradient of the negative log-likelihood.

    Returns the pair ``(grad_alpha, grad_B)`` with ``grad_alpha = 1'(P - Y)``
    and ``grad_B = X'(P - Y)``.  The descent direction is the negation.
    """
    alpha, B = _check_predict_args(alpha, B, dataset.X)
    P = _softmax_rows(_linear_predictor(alpha, B, dataset.X))
    R = P - indicator_matrix(dataset.y, dataset.K)
    grad_alpha = R.sum(axis=0)
    grad_B = np.asarray(dataset.X.T @ R)
    return grad_alpha, grad_B


def lipschitz_bound(X: Matrix, K: int) -> float:
    """Global Lipschitz constant sqrt(K) * ||X||_F^2 for the likelihood gradient."""
    if _is_sparse(X):
        frob_sq = float(X.multiply(X).sum())
    else:
        frob_sq = float(np.sum(np.asarray(X, dtype=float) ** 2))
    return float(np.sqrt(K) * frob_sq)
