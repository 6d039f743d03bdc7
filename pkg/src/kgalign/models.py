"""Pluggable alignment models producing similarity matrices.

Three implementations share one small interface (``fit`` +
``similarities``):

* ``EmbeddingAligner`` — a trainable translation-style embedding model with
  margin ranking loss and hard parameter sharing: entities joined by a
  training mapping collapse to a single vector through a union-find table.
* ``SyntheticOracle`` — a deterministic test double whose similarity rows
  are correct for a configurable fraction of entities; it isolates the
  self-training machinery from model quality.
* ``ExternalSimilarityModel`` — serves matrices imported from the on-disk
  exchange format (see ``simio``) in place of an internal model.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .kg import KgPair, MappingSet

SRC_TO_TGT = "src_to_tgt"
TGT_TO_SRC = "tgt_to_src"


@dataclass(frozen=True)
class SimMatrix:
    """Dense similarity scores, one row per source-role entity."""

    scores: np.ndarray
    direction: str = SRC_TO_TGT

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        object.__setattr__(self, "scores", s)
        if s.ndim != 2:
            raise ValueError("scores must be a 2-d matrix")
        if not np.all(np.isfinite(s)):
            raise ValueError("similarities must be finite")
        if self.direction not in (SRC_TO_TGT, TGT_TO_SRC):
            raise ValueError(f"bad direction: {self.direction!r}")


@dataclass(frozen=True)
class TopKSimMatrix:
    """Top-K sparse similarity rows with a shared fill score for the tail.

    Rows are sorted by descending score; ``n_cols`` is the full candidate
    count of the dense equivalent.
    """

    cand_ids: np.ndarray   # (n_rows, k) int
    scores: np.ndarray     # (n_rows, k) float, descending per row
    fill: float
    n_cols: int
    direction: str = SRC_TO_TGT

    def __post_init__(self):
        if self.cand_ids.shape != self.scores.shape:
            raise ValueError("cand_ids / scores shape mismatch")
        if np.any(np.diff(self.scores, axis=1) > 0):
            raise ValueError("top-k rows must be sorted descending")

    def to_dense(self) -> SimMatrix:
        dense = np.full((self.cand_ids.shape[0], self.n_cols), self.fill)
        rows = np.arange(self.cand_ids.shape[0])[:, None]
        dense[rows, self.cand_ids] = self.scores
        return SimMatrix(scores=dense, direction=self.direction)


def top_k_of(matrix: SimMatrix, k: int, fill: float | None = None) -> TopKSimMatrix:
    """Keep the k best-scoring candidates per row (ties to lower ids)."""
    s = matrix.scores
    k = min(k, s.shape[1])
    # stable sort on negated scores keeps the lowest ids on ties
    ids = np.argsort(-s, axis=1, kind="stable")[:, :k]
    rows = np.arange(s.shape[0])[:, None]
    return TopKSimMatrix(
        cand_ids=ids,
        scores=s[rows, ids],
        fill=float(s.min() if fill is None else fill),
        n_cols=s.shape[1],
        direction=matrix.direction,
    )


class AlignmentModel(Protocol):
    """What the self-training loop needs from a model."""

    def fit(self, kg_pair: KgPair, train: MappingSet, epochs: int) -> list[float]:
        """Update parameters on the given training mappings; returns the
        per-epoch loss trace."""

    def similarities(self, direction: str) -> SimMatrix:
        """Similarity matrix for the requested direction."""


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        # smaller id wins the root for determinism
        if ra < rb:
            self.parent[rb] = ra
        else:
            self.parent[ra] = rb


def margin_ranking_loss_and_grad(
    ent: np.ndarray,
    rel: np.ndarray,
    pos: np.ndarray,
    neg: np.ndarray,
    margin: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Total hinge loss over (positive, corrupted) triple pairs.

    ``pos`` and ``neg`` are (n, 3) index arrays (head, relation, tail) into
    ``ent`` / ``rel``; the loss per pair is
    ``max(0, margin + |h + r - t| - |h' + r - t'|)`` with Euclidean norms.
    Returns the summed loss and dense gradients for both tables.
    """
    d_pos = ent[pos[:, 0]] + rel[pos[:, 1]] - ent[pos[:, 2]]
    d_neg = ent[neg[:, 0]] + rel[neg[:, 1]] - ent[neg[:, 2]]
    norm_pos = np.sqrt((d_pos * d_pos).sum(axis=1))
    norm_neg = np.sqrt((d_neg * d_neg).sum(axis=1))
    viol = margin + norm_pos - norm_neg
    active = viol > 0
    loss = float(np.where(active, viol, 0.0).sum())

    g_ent = np.zeros_like(ent)
    g_rel = np.zeros_like(rel)
    if active.any():
        u_pos = d_pos[active] / np.maximum(norm_pos[active], 1e-12)[:, None]
        u_neg = d_neg[active] / np.maximum(norm_neg[active], 1e-12)[:, None]
        p, q = pos[active], neg[active]
        np.add.at(g_ent, p[:, 0], u_pos)
        np.add.at(g_ent, p[:, 2], -u_pos)
        np.add.at(g_rel, p[:, 1], u_pos)
        np.add.at(g_ent, q[:, 0], -u_neg)
        np.add.at(g_ent, q[:, 2], u_neg)
        np.add.at(g_rel, q[:, 1], -u_neg)
    return loss, g_ent, g_rel


@dataclass
class EmbeddingAlignerParams:
    dim: int = 64
    margin: float = 1.0
    negatives: int = 5
    lr: float = 0.01
    epochs: int = 50      # per self-training iteration
    batch_size: int = 256


class EmbeddingAligner:
    """Translation-embedding aligner with union-find parameter sharing.

    Entities of both graphs live in one table (target ids shifted by the
    source entity count); each training mapping merges its two entities into
    one equivalence class whose root vector is the only one trained.  The
    union-find table is rebuilt from the training set on every ``fit`` so
    pseudo mappings regenerated between iterations never leave stale merges
    behind.  Entity vectors are renormalized to unit length after every
    update; the exposed similarity is the cosine.
    """

    def __init__(self, params: EmbeddingAlignerParams | None = None, seed: int = 0):
        self.params = params or EmbeddingAlignerParams()
        self.seed = seed
        self._rng = np.random.Generator(np.random.PCG64(seed))
        self._ent: np.ndarray | None = None
        self._rel: np.ndarray | None = None
        self._n_src = 0
        self._n_rel_src = 0
        self._fitted = False
        self.loss_trace: list[float] = []

    def reset(self) -> None:
        """Cold restart: re-seed the PRNG and drop all parameters."""
        self._rng = np.random.Generator(np.random.PCG64(self.seed))
        self._ent = None
        self._rel = None
        self._fitted = False
        self.loss_trace = []

    def _init_tables(self, pair: KgPair) -> None:
        p = self.params
        n = pair.source.n_entities + pair.target.n_entities
        self._n_src = pair.source.n_entities
        self._n_rel_src = max(pair.source.n_relations, 1)
        ent = self._rng.normal(size=(n, p.dim))
        ent /= np.linalg.norm(ent, axis=1, keepdims=True)
        # relation tables are per KG, target relations offset past source ones
        rel = self._rng.normal(
            size=(self._n_rel_src + max(pair.target.n_relations, 1), p.dim)
        )
        rel /= np.linalg.norm(rel, axis=1, keepdims=True)
        self._ent, self._rel = ent, rel

    def fit(self, kg_pair: KgPair, train: MappingSet, epochs: int) -> list[float]:
        if len(train) == 0:
            raise ValueError("training mappings must be nonempty")
        if epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self._ent is None:
            self._init_tables(kg_pair)
        assert self._ent is not None

        n_src = kg_pair.source.n_entities
        uf = _UnionFind(self._ent.shape[0])
        for s, t in train.pairs:
            uf.union(s, n_src + t)
        root = np.array([uf.find(i) for i in range(self._ent.shape[0])])
        # every member row follows its root vector from the start of the fit
        self._ent = self._ent[root].copy()

        triples = [(h, r, t, 0) for h, r, t in kg_pair.source.triples]
        triples += [
            (n_src + h, r, n_src + t, 1) for h, r, t in kg_pair.target.triples
        ]
        trip = np.array(triples, dtype=np.int64)
        trip[:, 0] = root[trip[:, 0]]
        trip[:, 2] = root[trip[:, 2]]

        p = self.params
        trace = []
        for _ in range(epochs):
            order = self._rng.permutation(trip.shape[0])
            epoch_loss = 0.0
            n_pairs = 0
            for start in range(0, trip.shape[0], p.batch_size):
                batch = trip[order[start : start + p.batch_size]]
                epoch_loss += self._step(batch, kg_pair, root)
                n_pairs += batch.shape[0] * p.negatives
            trace.append(epoch_loss / max(n_pairs, 1))
        # flatten: every entity row holds its effective (root) vector so the
        # union-find can be rebuilt freely on the next fit
        self._ent = self._ent[root]
        self._fitted = True
        self.loss_trace.extend(trace)
        return trace

    def _step(self, batch: np.ndarray, pair: KgPair, root: np.ndarray) -> float:
        p = self.params
        n_src = pair.source.n_entities
        k = p.negatives
        rep = np.repeat(batch, k, axis=0)
        m = rep.shape[0]
        corrupt_tail = self._rng.integers(0, 2, size=m).astype(bool)
        src_side = rep[:, 3] == 0
        repl = np.where(
            src_side,
            self._rng.integers(0, n_src, size=m),
            n_src + self._rng.integers(0, pair.target.n_entities, size=m),
        )
        repl = root[repl]
        neg = rep[:, :3].copy()
        neg[corrupt_tail, 2] = repl[corrupt_tail]
        neg[~corrupt_tail, 0] = repl[~corrupt_tail]

        pos = rep[:, :3].copy()
        pos[:, 1] = np.where(src_side, pos[:, 1], pos[:, 1] + self._n_rel_src)
        neg[:, 1] = pos[:, 1]

        loss, g_ent, g_rel = margin_ranking_loss_and_grad(
            self._ent, self._rel, pos, neg, p.margin
        )
        self._ent -= p.lr * g_ent
        self._rel -= p.lr * g_rel
        norms = np.linalg.norm(self._ent, axis=1, keepdims=True)
        self._ent /= np.maximum(norms, 1e-12)
        return loss

    def similarities(self, direction: str = SRC_TO_TGT) -> SimMatrix:
        if not self._fitted or self._ent is None:
            raise RuntimeError("model must be fitted before querying similarities")
        src = self._ent[: self._n_src]
        tgt = self._ent[self._n_src :]
        sims = src @ tgt.T  # rows are unit vectors, so this is the cosine
        if direction == SRC_TO_TGT:
            return SimMatrix(scores=sims, direction=direction)
        if direction == TGT_TO_SRC:
            return SimMatrix(scores=sims.T.copy(), direction=direction)
        raise ValueError(f"bad direction: {direction!r}")


class SyntheticOracle:
    """Deterministic similarity oracle built from ground-truth mappings.

    For a ``1 - noise_rate`` fraction of truth-covered source entities the
    row maximum sits on the true counterpart (score in [0.8, 1.0]); for the
    remaining (exactly ``round(noise_rate * n)``) rows it sits on a random
    wrong candidate.  Every other cell is drawn from [0, 0.5].  ``fit`` is a
    no-op: the oracle's scores never react to training.
    """

    def __init__(
        self,
        kg_pair: KgPair,
        truth: MappingSet,
        noise_rate: float = 0.0,
        seed: int = 0,
    ):
        if not (0.0 <= noise_rate <= 1.0):
            raise ValueError("noise_rate must be in [0, 1]")
        rng = np.random.Generator(np.random.PCG64(seed))
        n_src = kg_pair.source.n_entities
        n_tgt = kg_pair.target.n_entities
        m = rng.uniform(0.0, 0.5, size=(n_src, n_tgt))
        truth_rows = sorted({s for s, _ in truth.pairs})
        truth_map = dict(truth.pairs)
        n_noised = round(noise_rate * len(truth_rows))
        noised = set(
            np.array(truth_rows)[rng.permutation(len(truth_rows))[:n_noised]].tolist()
        )
        for u in truth_rows:
            t = truth_map[u]
            if u in noised:
                wrong = int(rng.integers(0, n_tgt - 1))
                if wrong >= t:
                    wrong += 1
                m[u, wrong] = rng.uniform(0.8, 1.0)
            else:
                m[u, t] = rng.uniform(0.8, 1.0)
        self._matrix = m
        self.noised_rows = noised

    def fit(self, kg_pair: KgPair, train: MappingSet, epochs: int) -> list[float]:
        if len(train) == 0:
            raise ValueError("training mappings must be nonempty")
        if epochs < 1:
            raise ValueError("epochs must be >= 1")
        return [0.0] * epochs

    def similarities(self, direction: str = SRC_TO_TGT) -> SimMatrix:
        if direction == SRC_TO_TGT:
            return SimMatrix(scores=self._matrix.copy(), direction=direction)
        if direction == TGT_TO_SRC:
            return SimMatrix(scores=self._matrix.T.copy(), direction=direction)
        raise ValueError(f"bad direction: {direction!r}")


@dataclass
class ExternalSimilarityModel:
    """Serves imported similarity matrices instead of training a model."""

    forward: SimMatrix
    reverse: SimMatrix | None = None

    def fit(self, kg_pair: KgPair, train: MappingSet, epochs: int) -> list[float]:
        if len(train) == 0:
            raise ValueError("training mappings must be nonempty")
        return [0.0] * max(epochs, 0)

    def similarities(self, direction: str = SRC_TO_TGT) -> SimMatrix:
        if direction == SRC_TO_TGT:
            return self.forward
        if direction == TGT_TO_SRC:
            if self.reverse is not None:
                return self.reverse
            return SimMatrix(scores=self.forward.scores.T.copy(), direction=direction)
        raise ValueError(f"bad direction: {direction!r}")
