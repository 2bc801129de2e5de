"""Scoring of reconstructed subgraphs and replication summaries.

All scores compare upper triangles of symmetric adjacency matrices.  The
true/estimated positive rates follow the reporting convention of the
simulation study this package reproduces: TPR divides by the number of
*estimated* positives (precision-shaped) and TNR by the number of
estimated negatives.  The conventional recall is also emitted, under its
own name, to avoid confusion.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class ReconstructionScore:
    accuracy: float
    tpr: Optional[float]  # correct edges / estimated edges; None if no edges estimated
    tnr: Optional[float]  # correct non-edges / estimated non-edges; None if none
    recall: Optional[float]  # correct edges / true edges; None if truth has no edges
    edge_count_true: int
    edge_count_est: int
    n_pairs: int


def score(est: np.ndarray, truth: np.ndarray) -> ReconstructionScore:
    """Confusion-table scores of an estimated adjacency against the truth."""
    a = np.asarray(est)
    b = np.asarray(truth)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("adjacency matrices must be square and of equal size")
    if np.any(a != a.T) or np.any(b != b.T):
        raise ValueError("adjacency matrices must be symmetric")
    iu = np.triu_indices(a.shape[0], k=1)
    ea = a[iu].astype(bool)
    eb = b[iu].astype(bool)
    n_pairs = ea.size
    tp = int(np.sum(ea & eb))
    tn = int(np.sum(~ea & ~eb))
    est_pos = int(np.sum(ea))
    est_neg = n_pairs - est_pos
    true_pos = int(np.sum(eb))
    return ReconstructionScore(
        accuracy=float(np.sum(ea == eb)) / n_pairs if n_pairs else 1.0,
        tpr=tp / est_pos if est_pos else None,
        tnr=tn / est_neg if est_neg else None,
        recall=tp / true_pos if true_pos else None,
        edge_count_true=true_pos,
        edge_count_est=est_pos,
        n_pairs=n_pairs,
    )


@dataclass(frozen=True)
class SummaryRow:
    """Mean/SD summary of one experiment cell, in the layout of the results tables."""

    n_replications: int
    accuracy_mean: float
    accuracy_sd: float
    tpr_mean: float
    tpr_sd: float
    tnr_mean: float
    tnr_sd: float
    lambda_mean: float
    lambda_sd: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def summarize_replications(
    scores: Sequence[ReconstructionScore], lams: Sequence[float]
) -> SummaryRow:
    """Aggregate per-replication scores and rate estimates into one table row.

    Undefined score fields (None) are excluded from their column; the SD is
    the sample standard deviation.
    """
    if len(scores) != len(lams):
        raise ValueError("need one rate estimate per score")
    if len(scores) < 2:
        raise ValueError("need at least two replications to summarise")

    def agg(values) -> tuple[float, float]:
        arr = np.array([np.nan if v is None else float(v) for v in values])
        return float(np.nanmean(arr)), float(np.nanstd(arr, ddof=1))

    acc = agg([s.accuracy for s in scores])
    tpr = agg([s.tpr for s in scores])
    tnr = agg([s.tnr for s in scores])
    lam = agg(lams)
    return SummaryRow(
        n_replications=len(scores),
        accuracy_mean=acc[0], accuracy_sd=acc[1],
        tpr_mean=tpr[0], tpr_sd=tpr[1],
        tnr_mean=tnr[0], tnr_sd=tnr[1],
        lambda_mean=lam[0], lambda_sd=lam[1],
    )
