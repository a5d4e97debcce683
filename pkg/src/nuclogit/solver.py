"""Proximal gradient solvers for penalized multinomial regression.

Two penalties share one backtracking loop: the nuclear norm (prox = singular
value soft thresholding, possibly block-wise) and the squared Frobenius norm
(smooth, folded into the gradient).  Steps start optimistic (``step_init``)
and the step size is halved, permanently, whenever a plain proximal gradient
step would increase the objective; accepted objective values are therefore
non-increasing.  The accelerated variant adds momentum in B; a momentum step
that would increase the objective is discarded by restarting the momentum at
the same step size, so a halving only ever reflects a too-large plain step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import NumericError
from .model import (
    Dataset,
    ModelFit,
    indicator_matrix,
    negative_log_likelihood,
    nll_and_probabilities,
    predict_probabilities,
)
from .prox import (
    PenaltyGroups,
    center_rows,
    effective_rank,
    grouped_nuclear_norm,
    grouped_svt,
)


@dataclass
class SolverConfig:
    """Knobs for a single fit."""

    lam: float
    step_init: float = 0.1
    max_iter: int = 10_000
    rel_tol: float = 1e-7
    accelerate: bool = True
    groups: Optional[PenaltyGroups] = None
    step_floor: float = 1e-12

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lam must be nonnegative, got {self.lam}")
        if not (self.step_init > self.step_floor > 0):
            raise ValueError("need step_init > step_floor > 0")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


@dataclass
class FitTrace:
    """Per-iteration record of one solver run."""

    objectives: np.ndarray
    step_sizes: np.ndarray
    iterations: int
    converged: bool
    halvings: int


def objective(alpha, B, dataset: Dataset, lam: float,
              groups: Optional[PenaltyGroups] = None) -> float:
    """Negative log-likelihood plus ``lam`` times the (grouped) nuclear norm."""
    nll = negative_log_likelihood(alpha, B, dataset)
    if lam == 0:
        return nll
    return nll + lam * grouped_nuclear_norm(np.asarray(B, dtype=float), groups)


def pgd_step(alpha, B, dataset: Dataset, s: float, lam: float,
             groups: Optional[PenaltyGroups] = None):
    """One plain proximal gradient update at step size ``s``.

    Returns ``(alpha + s 1'(Y - P), prox(B + s X'(Y - P)))`` where the prox
    soft-thresholds singular values at ``s * lam`` (block-wise if grouped).
    """
    if s <= 0:
        raise ValueError(f"step size must be positive, got {s}")
    P = predict_probabilities(alpha, B, dataset.X)
    R = indicator_matrix(dataset.y, dataset.K) - P
    alpha_new = np.asarray(alpha, dtype=float) + s * R.sum(axis=0)
    B_new = grouped_svt(np.asarray(B, dtype=float) + s * np.asarray(dataset.X.T @ R),
                        groups, s * lam)
    return alpha_new, B_new


def _fit(dataset: Dataset, config: SolverConfig, kind: str, init=None):
    """Shared backtracking loop for the nuclear and ridge penalties."""
    X, y, K = dataset.X, dataset.y, dataset.K
    n, p = X.shape
    lam = config.lam
    groups = config.groups
    if groups is not None:
        groups.validate(p)

    if kind == "nuclear":
        pen_mask = None

        def penalty(B):
            return lam * grouped_nuclear_norm(B, groups) if lam else 0.0
    else:  # ridge: smooth penalty on all rows except the designated exempt set
        pen_mask = np.ones((p, 1))
        if groups is not None and groups.unpenalized.size:
            pen_mask[groups.unpenalized] = 0.0

        def penalty(B):
            return lam * float(np.sum((B * pen_mask) ** 2)) if lam else 0.0

    if init is None:
        alpha = np.zeros(K)
        B = np.zeros((p, K))
    else:
        alpha = np.array(init[0], dtype=float)
        B = np.array(init[1], dtype=float)

    Y = indicator_matrix(y, K)
    nll, P = nll_and_probabilities(alpha, B, X, y)
    obj = nll + penalty(B)

    trace = [obj]
    steps = []
    s = config.step_init
    halvings = 0
    t_mom = 0
    B_prev = B
    converged = False

    for _ in range(config.max_iter):
        # both quantities depend only on the current accepted iterate
        rsum = (Y - P).sum(axis=0)
        G_here = np.asarray(X.T @ (Y - P))
        while True:
            alpha_new = alpha + s * rsum
            if config.accelerate:
                # extrapolate, then refresh probabilities at the new intercept
                # and the extrapolated coefficients before the prox step
                if t_mom > 0:
                    base = B + (t_mom / (t_mom + 3.0)) * (B - B_prev)
                else:
                    base = B
                _, P_step = nll_and_probabilities(alpha_new, base, X, y)
                G = np.asarray(X.T @ (Y - P_step))
            else:
                base = B
                G = G_here
            if kind == "nuclear":
                B_new = grouped_svt(base + s * G, groups, s * lam)
            else:
                B_new = base + s * (G - 2.0 * lam * (base * pen_mask))
            nll_new, P_new = nll_and_probabilities(alpha_new, B_new, X, y)
            obj_new = nll_new + penalty(B_new)
            if obj_new <= obj:
                break
            if config.accelerate and t_mom > 0:
                # overshooting momentum, not a too-large step: restart and retry
                t_mom = 0
                B_prev = B
                continue
            s *= 0.5
            halvings += 1
            if s < config.step_floor:
                raise NumericError(
                    f"step collapse: step size fell below {config.step_floor} "
                    "without an accepted step"
                )

        B_prev = B
        alpha, B, P = alpha_new, B_new, P_new
        t_mom += 1
        trace.append(obj_new)
        steps.append(s)
        if abs(obj - obj_new) <= config.rel_tol * (1.0 + abs(obj_new)):
            converged = True
            break
        obj = obj_new

    alpha = alpha - alpha.mean()
    if kind == "nuclear":
        if groups is not None:
            for idx in groups.groups.values():
                B[idx] = center_rows(B[idx])
            per_group = {name: effective_rank(B[idx])
                         for name, idx in groups.groups.items()}
            rank = sum(per_group.values())
        else:
            B = center_rows(B)
            per_group = {}
            rank = effective_rank(B)
        penalty_kind = "nuclear" if lam > 0 else "none"
    else:
        pen_rows = np.flatnonzero(pen_mask.ravel())
        B[pen_rows] = center_rows(B[pen_rows])
        per_group = {}
        rank = effective_rank(B)
        penalty_kind = "frobenius_squared" if lam > 0 else "none"

    fit = ModelFit(
        alpha=alpha,
        B=B,
        objective_trace=np.array(trace),
        final_rank=rank,
        lam=lam,
        penalty_kind=penalty_kind,
        per_group_rank=per_group,
    )
    fit_trace = FitTrace(
        objectives=np.array(trace),
        step_sizes=np.array(steps),
        iterations=len(steps),
        converged=converged,
        halvings=halvings,
    )
    return fit, fit_trace


def fit_npmr(dataset: Dataset, config: SolverConfig, init=None) -> Tuple[ModelFit, FitTrace]:
    """Minimize NLL + lam * (grouped) nuclear norm by (accelerated) PGD.

    Starts from zero unless ``init=(alpha0, B0)`` warm-starts the iterate.
    Stops when the relative objective change drops below ``rel_tol`` or
    ``max_iter`` is reached (``converged=False`` then, not an error).
    Before returning, subtracts the mean from alpha and row-centers every
    penalized block of B; neither changes the fitted probabilities.
    """
    return _fit(dataset, config, "nuclear", init)


def fit_ridge(dataset: Dataset, config: SolverConfig, init=None) -> Tuple[ModelFit, FitTrace]:
    """Minimize NLL + lam * ||B||_F^2 by (accelerated) gradient descent.

    ``config.groups`` only designates rows exempt from the penalty; the
    group partition itself is ignored.  Backtracking, convergence, and the
    post-fit normalization match :func:`fit_npmr`.
    """
    return _fit(dataset, config, "ridge", init)


def fit_null(dataset: Dataset) -> ModelFit:
    """Intercept-only model: B = 0, alpha = centered log class proportions."""
    counts = np.bincount(dataset.y, minlength=dataset.K + 1)[1:]
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        names = ", ".join(dataset.class_names[k] for k in missing)
        raise ValueError(f"class never observed: {names}")
    alpha = np.log(counts / dataset.n)
    alpha = alpha - alpha.mean()
    B = np.zeros((dataset.p, dataset.K))
    nll = negative_log_likelihood(alpha, B, dataset)
    return ModelFit(
        alpha=alpha,
        B=B,
        objective_trace=np.array([nll]),
        final_rank=0,
        lam=0.0,
        penalty_kind="none",
    )
