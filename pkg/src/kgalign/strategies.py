"""Pseudo-mapping generation strategies.

Three probability strategies consume dependency-aware candidate
distributions (``UniThr``, ``BiThr``, ``MutHighestProb``) and three baseline
strategies consume raw similarities (``SimThr``, ``OneToOne``,
``MutNearest``).  Rows handed to any strategy are expected to cover only
unlabelled entities on both coordinates; outputs are sorted by source id.
Argmax ties break to the lowest candidate id throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .calibration import ProbRow, argmax_lowest_id
from .kg import MappingSet

PROBABILITY_STRATEGIES = ("UniThr", "BiThr", "MutHighestProb")
SIMILARITY_STRATEGIES = ("SimThr", "OneToOne", "MutNearest")
ALL_STRATEGIES = PROBABILITY_STRATEGIES + SIMILARITY_STRATEGIES


def _check_alpha(alpha: float) -> None:
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"probability threshold must be in (0,1), got {alpha}")


def _sorted_mapping(pairs_scores: dict[tuple[int, int], float]) -> MappingSet:
    items = sorted(pairs_scores.items())
    return MappingSet(
        pairs=tuple(p for p, _ in items),
        kind="pseudo",
        scores=tuple(s for _, s in items),
    )


def uni_threshold(rows: list[ProbRow], alpha: float) -> MappingSet:
    """Keep each row's argmax pair when its probability clears ``alpha``."""
    _check_alpha(alpha)
    picked: dict[tuple[int, int], float] = {}
    for row in rows:
        best = row.argmax_candidate()
        p = float(row.probs[row.cand_ids.index(best)])
        if p > alpha:
            picked[(row.entity, best)] = p
    return _sorted_mapping(picked)


def bi_threshold(
    rows_forward: list[ProbRow], rows_reverse: list[ProbRow], alpha: float
) -> MappingSet:
    """Union of both directions' threshold picks, reverse pairs flipped."""
    fwd = uni_threshold(rows_forward, alpha)
    rev = uni_threshold(rows_reverse, alpha).flipped()
    picked: dict[tuple[int, int], float] = {}
    for ms in (fwd, rev):
        for pair, score in zip(ms.pairs, ms.scores or ()):
            picked[pair] = max(score, picked.get(pair, score))
    return _sorted_mapping(picked)


def mutual_highest_probability(
    rows_forward: list[ProbRow], rows_reverse: list[ProbRow]
) -> MappingSet:
    """Pairs whose two rows point at each other as argmax; no threshold."""
    fwd_best = {row.entity: row.argmax_candidate() for row in rows_forward}
    rev_best = {row.entity: row.argmax_candidate() for row in rows_reverse}
    fwd_prob = {row.entity: row.top_prob() for row in rows_forward}
    picked: dict[tuple[int, int], float] = {}
    for u, u_prime in fwd_best.items():
        if rev_best.get(u_prime) == u:
            picked[(u, u_prime)] = fwd_prob[u]
    return _sorted_mapping(picked)


def similarity_threshold(
    sims: np.ndarray, row_ids, col_ids, theta: float
) -> MappingSet:
    """Baseline: keep each row's argmax pair when its similarity > theta."""
    sims = np.asarray(sims, dtype=np.float64)
    col_ids = list(col_ids)
    picked: dict[tuple[int, int], float] = {}
    for i, u in enumerate(row_ids):
        best = argmax_lowest_id(col_ids, sims[i])
        s = float(sims[i][col_ids.index(best)])
        if s > theta:
            picked[(u, best)] = s
    return _sorted_mapping(picked)


@dataclass
class OneToOneState:
    """Cross-iteration accumulator for the one-to-one baseline.

    Holds the retained pairs with the similarity that admitted them so
    later, higher-similarity conflicts can displace them.
    """

    scores: dict[tuple[int, int], float] = field(default_factory=dict)

    def as_mapping_set(self) -> MappingSet:
        return _sorted_mapping(self.scores)


def one_to_one_matching(
    sims: np.ndarray, row_ids, col_ids, theta: float, state: OneToOneState
) -> MappingSet:
    """Baseline: greedy one-to-one matching merged into the accumulator.

    Candidate edges are every pair above ``theta``; a greedy pass in
    descending similarity yields a one-to-one set for this iteration, which
    is then merged into the accumulated store, resolving conflicts in favor
    of the higher-similarity pair (existing pairs win ties).
    """
    sims = np.asarray(sims, dtype=np.float64)
    row_ids = list(row_ids)
    col_ids = list(col_ids)
    ri, ci = np.nonzero(sims > theta)
    edges = sorted(
        ((float(sims[i, j]), row_ids[i], col_ids[j]) for i, j in zip(ri, ci)),
        key=lambda e: (-e[0], e[1], e[2]),
    )
    used_src: set[int] = set()
    used_tgt: set[int] = set()
    fresh: list[tuple[float, int, int]] = []
    for score, u, t in edges:
        if u in used_src or t in used_tgt:
            continue
        used_src.add(u)
        used_tgt.add(t)
        fresh.append((score, u, t))

    by_src = {u: (u, t) for (u, t) in state.scores}
    by_tgt = {t: (u, t) for (u, t) in state.scores}
    for score, u, t in fresh:  # already in descending-score order
        conflicts = {p for p in (by_src.get(u), by_tgt.get(t)) if p is not None}
        if any(state.scores[p] >= score for p in conflicts):
            continue
        for p in conflicts:
            del state.scores[p]
            by_src.pop(p[0], None)
            by_tgt.pop(p[1], None)
        state.scores[(u, t)] = score
        by_src[u] = (u, t)
        by_tgt[t] = (u, t)
    return state.as_mapping_set()


def mutual_nearest(
    sims_forward: np.ndarray,
    fwd_row_ids,
    fwd_col_ids,
    sims_reverse: np.ndarray,
    rev_row_ids,
    rev_col_ids,
) -> MappingSet:
    """Baseline: pairs that are mutually nearest under raw similarity."""
    sims_forward = np.asarray(sims_forward, dtype=np.float64)
    sims_reverse = np.asarray(sims_reverse, dtype=np.float64)
    fwd_col_ids = list(fwd_col_ids)
    rev_col_ids = list(rev_col_ids)
    fwd_best = {
        u: argmax_lowest_id(fwd_col_ids, sims_forward[i])
        for i, u in enumerate(fwd_row_ids)
    }
    fwd_score = {
        u: float(sims_forward[i].max()) for i, u in enumerate(fwd_row_ids)
    }
    rev_best = {
        t: argmax_lowest_id(rev_col_ids, sims_reverse[i])
        for i, t in enumerate(rev_row_ids)
    }
    picked: dict[tuple[int, int], float] = {}
    for u, t in fwd_best.items():
        if rev_best.get(t) == u:
            picked[(u, t)] = fwd_score[u]
    return _sorted_mapping(picked)
