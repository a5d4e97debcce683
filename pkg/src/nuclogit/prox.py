"""Nuclear norm, singular-value soft thresholding, and row centering.

The proximal operator of ``t * ||.||_*`` soft-thresholds the singular values:
decompose M = U diag(sigma) V', shrink each sigma toward zero by t, and
reconstruct.  The grouped variant applies the operator block-wise to disjoint
row sets, leaving designated rows untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, NamedTuple, Optional

import numpy as np

from .errors import NumericError

# a singular value counts toward the rank iff it exceeds
# RANK_TOL * max(1, sigma_1); soft thresholding produces exact zeros but
# accumulated float error needs a floor
RANK_TOL = 1e-8


class SvdTriple(NamedTuple):
    """Thin SVD with r = min(p, K): U (p, r), sigma (r,), V (K, r)."""

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray


def thin_svd(M: np.ndarray) -> SvdTriple:
    """Thin singular value decomposition with canonicalized signs.

    ``sigma`` is non-increasing and the first entry of each V column whose
    magnitude rises above noise level is nonnegative (U flips along with V,
    so U diag(sigma) V' reconstructs M).  Deterministic for a fixed input.
    """
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix contains non-finite entries")
    try:
        U, sigma, Vh = np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError as exc:  # LAPACK gives no iteration count
        raise NumericError(f"SVD did not converge: {exc}") from exc
    V = Vh.T
    for j in range(V.shape[1]):
        col = V[:, j]
        nonzero = np.flatnonzero(np.abs(col) > 1e-12)
        if nonzero.size and col[nonzero[0]] < 0:
            V[:, j] = -col
            U[:, j] = -U[:, j]
    return SvdTriple(U, sigma, V)


def nuclear_norm(M: np.ndarray) -> float:
    """Sum of the singular values of M."""
    return float(thin_svd(M).sigma.sum())


def rank_from_singular_values(sigma: np.ndarray) -> int:
    """Number of singular values above the rank tolerance."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.size == 0:
        return 0
    return int(np.count_nonzero(sigma > RANK_TOL * max(1.0, float(sigma[0]))))


def effective_rank(M: np.ndarray) -> int:
    """Rank of M under the package-wide singular value tolerance."""
    return rank_from_singular_values(thin_svd(M).sigma)


def svt(M: np.ndarray, threshold: float) -> np.ndarray:
    """Soft-threshold the singular values of M by ``threshold``.

    This is the proximal operator of ``threshold * ||.||_*``: the unique
    minimizer of ``0.5 * ||Z - M||_F^2 + threshold * ||Z||_*``.
    """
    if threshold < 0:
        raise ValueError(f"threshold must be nonnegative, got {threshold}")
    M = np.asarray(M, dtype=float)
    if threshold == 0:
        return M.copy()
    U, sigma, V = thin_svd(M)
    shrunk = np.maximum(sigma - threshold, 0.0)
    return (U * shrunk) @ V.T


@dataclass
class PenaltyGroups:
    """Disjoint row groups, each penalized by its own nuclear norm.

    ``groups`` maps a group name to the 0-based row indices it covers;
    ``unpenalized`` rows belong to no group and pass through every proximal
    step unchanged.  Together they must cover ``{0..p-1}`` exactly once.
    """

    groups: Dict[str, np.ndarray]
    unpenalized: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))

    def __post_init__(self):
        self.groups = {k: np.asarray(v, dtype=int) for k, v in self.groups.items()}
        self.unpenalized = np.asarray(self.unpenalized, dtype=int)

    def validate(self, p: int) -> None:
        blocks = list(self.groups.values()) + [self.unpenalized]
        combined = np.concatenate([b for b in blocks]) if blocks else np.array([], dtype=int)
        if combined.size != p or np.unique(combined).size != p:
            raise ValueError("groups plus unpenalized must partition the rows exactly")
        if combined.size and (combined.min() < 0 or combined.max() >= p):
            raise ValueError(f"row indices must lie in 0..{p - 1}")

    @classmethod
    def single(cls, p: int, name: str = "coefficients") -> "PenaltyGroups":
        return cls(groups={name: np.arange(p)})

    def penalized_indices(self) -> np.ndarray:
        if not self.groups:
            return np.array([], dtype=int)
        return np.concatenate(list(self.groups.values()))


def grouped_svt(M: np.ndarray, groups: Optional[PenaltyGroups], threshold: float) -> np.ndarray:
    """Apply :func:`svt` independently to each group's row block.

    ``groups=None`` means one group covering every row.  Unpenalized rows
    are copied unchanged (their prox is the identity).
    """
    if groups is None:
        return svt(M, threshold)
    M = np.asarray(M, dtype=float)
    groups.validate(M.shape[0])
    out = M.copy()
    for idx in groups.groups.values():
        out[idx] = svt(M[idx], threshold)
    return out


def center_rows(M: np.ndarray) -> np.ndarray:
    """Subtract its mean from every row of M.

    Never increases the nuclear norm, and never changes fitted
    probabilities when applied to (a row block of) a coefficient matrix.
    """
    M = np.asarray(M, dtype=float)
    return M - M.mean(axis=1, keepdims=True)


def grouped_nuclear_norm(M: np.ndarray, groups: Optional[PenaltyGroups]) -> float:
    """Sum of per-group nuclear norms; unpenalized rows contribute zero."""
    if groups is None:
        return nuclear_norm(M)
    groups.validate(M.shape[0])
    return float(sum(nuclear_norm(M[idx]) for idx in groups.groups.values()))
