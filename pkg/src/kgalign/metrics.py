"""Ranking metrics and pseudo-mapping quality.

Ranks break ties by the lowest candidate id, consistent with everything
else in the package.  All functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kg import MappingSet


@dataclass(frozen=True)
class EvalReport:
    hit1: float
    hit10: float
    mrr: float
    n: int

    def __post_init__(self):
        if not (0.0 <= self.hit1 <= self.hit10 <= 1.0):
            raise ValueError("need 0 <= hit1 <= hit10 <= 1")
        if not (self.hit1 <= self.mrr <= 1.0):
            raise ValueError("need hit1 <= mrr <= 1")


def truth_ranks(rows: np.ndarray, truth_cols: np.ndarray) -> np.ndarray:
    """1-based rank of each row's ground-truth column.

    An entity with a higher score, or an equal score and a lower id, ranks
    ahead of the truth.
    """
    rows = np.asarray(rows, dtype=np.float64)
    truth_cols = np.asarray(truth_cols, dtype=np.int64)
    if rows.ndim != 2 or rows.shape[0] != truth_cols.shape[0]:
        raise ValueError("rows/truths shape mismatch")
    if np.any(truth_cols < 0) or np.any(truth_cols >= rows.shape[1]):
        raise ValueError("truth column out of range")
    idx = np.arange(rows.shape[0])
    truth_scores = rows[idx, truth_cols][:, None]
    ahead = (rows > truth_scores).sum(axis=1)
    col_ids = np.arange(rows.shape[1])[None, :]
    tied_lower = ((rows == truth_scores) & (col_ids < truth_cols[:, None])).sum(axis=1)
    return 1 + ahead + tied_lower


def hit_at_k(rows: np.ndarray, truth_cols: np.ndarray, k: int) -> float:
    """Fraction of rows whose truth ranks in the top ``k``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ranks = truth_ranks(rows, truth_cols)
    return float((ranks <= k).mean())


def mrr(rows: np.ndarray, truth_cols: np.ndarray) -> float:
    """Mean reciprocal rank of the ground-truth counterparts."""
    return float((1.0 / truth_ranks(rows, truth_cols)).mean())


def evaluate_rows(rows: np.ndarray, truth_cols: np.ndarray) -> EvalReport:
    ranks = truth_ranks(rows, truth_cols)
    return EvalReport(
        hit1=float((ranks <= 1).mean()),
        hit10=float((ranks <= 10).mean()),
        mrr=float((1.0 / ranks).mean()),
        n=int(ranks.shape[0]),
    )


def pseudo_quality(
    pseudo: MappingSet, truth: MappingSet
) -> tuple[float, float, bool]:
    """Precision and recall of a pseudo set against ground truth.

    Returns ``(precision, recall, empty)``; an empty pseudo set reports
    precision 1.0 with the ``empty`` flag raised so threshold sweeps never
    divide by zero.
    """
    truth_set = truth.as_set()
    if len(pseudo) == 0:
        return 1.0, 0.0, True
    correct = len(pseudo.as_set() & truth_set)
    return correct / len(pseudo), correct / len(truth_set), False
