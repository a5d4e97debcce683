"""Latent-factor report for a fitted coefficient matrix.

Decomposing a penalized block B_g = U diag(sigma) V' exposes the latent
variables the penalty selected: each V column is a loading pattern over the
outcome classes, and each row of U diag(sigma) gives a predictor's
coefficients on those latent variables instead of on the raw classes.  The
report lists, per block, the singular values above the rank tolerance, the
V loadings, and per latent dimension the predictors with the largest and
smallest latent coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .prox import PenaltyGroups, rank_from_singular_values, thin_svd

DEFAULT_TOP_M = 5


@dataclass
class GroupReport:
    name: str
    sigma: np.ndarray            # values above the rank tolerance, non-increasing
    loadings: np.ndarray         # (K, r) sign-canonicalized V columns
    class_names: List[str]
    # per latent dimension: (top, bottom) lists of (predictor, score)
    leaderboards: List[Tuple[List[Tuple[str, float]], List[Tuple[str, float]]]]

    @property
    def rank(self) -> int:
        return int(self.sigma.size)


@dataclass
class LatentReport:
    groups: List[GroupReport]
    top_m: int


def build_latent_report(B: np.ndarray, groups: Optional[PenaltyGroups],
                        feature_names, class_names,
                        top_m: int = DEFAULT_TOP_M) -> LatentReport:
    """Decompose each penalized block of ``B`` and rank its predictors.

    Scores in the leaderboards are the columns of U diag(sigma); ties break
    lexicographically by predictor name so output is reproducible.
    """
    if top_m < 1:
        raise ValueError("top_m must be positive")
    if groups is None or not groups.groups:
        groups = PenaltyGroups.single(B.shape[0])
    reports = []
    for name, idx in groups.groups.items():
        block = B[idx]
        U, sigma, V = thin_svd(block)
        r = rank_from_singular_values(sigma)
        names = [feature_names[i] for i in idx]
        scores = U[:, :r] * sigma[:r]
        leaderboards = []
        for d in range(r):
            ranked = sorted(zip(names, scores[:, d]), key=lambda t: (-t[1], t[0]))
            m = min(top_m, len(ranked))
            top = ranked[:m]
            bottom = sorted(ranked[-m:], key=lambda t: (t[1], t[0]))
            leaderboards.append((top, bottom))
        reports.append(GroupReport(
            name=name,
            sigma=sigma[:r].copy(),
            loadings=V[:, :r].copy(),
            class_names=list(class_names),
            leaderboards=leaderboards,
        ))
    return LatentReport(groups=reports, top_m=top_m)


def _fmt(x: float) -> str:
    return format(float(x), ".6g")


def format_text(report: LatentReport) -> str:
    """Fixed-layout text rendering: loadings matrix with a trailing sigma row."""
    lines = []
    for grp in report.groups:
        if grp.rank == 0:
            lines.append(f"group {grp.name}: no latent variables at this lambda")
            lines.append("")
            continue
        lines.append(f"group {grp.name}: {grp.rank} latent variable(s)")
        width = max(12, max(len(c) for c in grp.class_names) + 2)
        header = " " * width + "".join(f"{f'dim{d + 1}':>12}" for d in range(grp.rank))
        lines.append(header)
        for k, cname in enumerate(grp.class_names):
            row = "".join(f"{_fmt(grp.loadings[k, d]):>12}" for d in range(grp.rank))
            lines.append(f"{cname:<{width}}" + row)
        lines.append(f"{'sigma':<{width}}"
                     + "".join(f"{_fmt(s):>12}" for s in grp.sigma))
        for d, (top, bottom) in enumerate(grp.leaderboards):
            lines.append(f"  latent variable {d + 1} (sigma = {_fmt(grp.sigma[d])})")
            lines.append(f"    top {len(top)}:")
            for name, score in top:
                lines.append(f"      {name}  {_fmt(score)}")
            lines.append(f"    bottom {len(bottom)}:")
            for name, score in bottom:
                lines.append(f"      {name}  {_fmt(score)}")
        lines.append("")
    return "\n".join(lines)


def format_csv(report: LatentReport) -> str:
    """Machine-readable rendering: one row per loading / sigma / leaderboard entry."""
    lines = ["group,record,dimension,name,value"]
    for grp in report.groups:
        for d in range(grp.rank):
            lines.append(f"{grp.name},sigma,{d + 1},,{_fmt(grp.sigma[d])}")
        for k, cname in enumerate(grp.class_names):
            for d in range(grp.rank):
                lines.append(
                    f"{grp.name},loading,{d + 1},{cname},{_fmt(grp.loadings[k, d])}"
                )
        for d, (top, bottom) in enumerate(grp.leaderboards):
            for name, score in top:
                lines.append(f"{grp.name},top,{d + 1},{name},{_fmt(score)}")
            for name, score in bottom:
                lines.append(f"{grp.name},bottom,{d + 1},{name},{_fmt(score)}")
    return "\n".join(lines) + "\n"
