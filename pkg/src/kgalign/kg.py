"""Knowledge-graph representation, neighborhood indexing, and dataset I/O.

Entities and relations are interned to dense integer ids at load time (by
first appearance); all downstream numerics work on ids.  A ``Kg`` and its
indices are immutable after construction and safe to share across workers.

File formats:
  * triples: UTF-8, one ``head<TAB>relation<TAB>tail`` per line (LF or CRLF)
  * links:   UTF-8, one ``source_entity<TAB>target_entity`` per line

Partition sampling uses numpy's ``Generator`` over the PCG64 bit generator
(64-bit, seedable); the shuffle is ``Generator.permutation``.  This is the
pinned PRNG for cross-run reproducibility.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class KgFormatError(ValueError):
    """Raised for malformed triple/link files."""


def _read_rows(path: str | Path, n_fields: int) -> list[tuple[str, ...]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != n_fields or any(not f for f in fields):
                raise KgFormatError(
                    f"{path}:{lineno}: expected {n_fields} tab-separated fields, "
                    f"got {len(fields)}"
                )
            rows.append(tuple(fields))
    return rows


@dataclass(frozen=True)
class Kg:
    """One knowledge graph with interned ids and neighbor indices.

    ``out_index[e]`` / ``in_index[e]`` list ``(relation_id, neighbor_id)``
    pairs for triples where ``e`` is the head / tail respectively; together
    they contain each triple exactly once each.
    """

    entity_labels: tuple[str, ...]
    relation_labels: tuple[str, ...]
    triples: tuple[tuple[int, int, int], ...]
    out_index: tuple[tuple[tuple[int, int], ...], ...]
    in_index: tuple[tuple[tuple[int, int], ...], ...]
    duplicates_dropped: int = 0
    entity_ids: dict[str, int] = field(repr=False, default_factory=dict)
    relation_ids: dict[str, int] = field(repr=False, default_factory=dict)

    @property
    def n_entities(self) -> int:
        return len(self.entity_labels)

    @property
    def n_relations(self) -> int:
        return len(self.relation_labels)

    def neighbors(self, e: int) -> tuple[int, ...]:
        """Unique out- and in-neighbors of ``e``, sorted by id."""
        seen = {n for _, n in self.out_index[e]} | {n for _, n in self.in_index[e]}
        return tuple(sorted(seen))

    @staticmethod
    def from_label_triples(
        triples: list[tuple[str, str, str]],
        extra_entities: tuple[str, ...] = (),
    ) -> "Kg":
        """Build a Kg from string triples, deduplicating exact repeats.

        ``extra_entities`` appends trailing isolated entities (labels already
        interned keep their ids); used for link entities that never appear in
        any triple.
        """
        ent_ids: dict[str, int] = {}
        rel_ids: dict[str, int] = {}

        def ent(label: str) -> int:
            if label not in ent_ids:
                ent_ids[label] = len(ent_ids)
            return ent_ids[label]

        def rel(label: str) -> int:
            if label not in rel_ids:
                rel_ids[label] = len(rel_ids)
            return rel_ids[label]

        seen: set[tuple[int, int, int]] = set()
        id_triples: list[tuple[int, int, int]] = []
        dropped = 0
        for h, r, t in triples:
            trip = (ent(h), rel(r), ent(t))
            if trip in seen:
                dropped += 1
                continue
            seen.add(trip)
            id_triples.append(trip)
        if not id_triples:
            raise KgFormatError("no triples")
        for label in extra_entities:
            ent(label)

        out: list[list[tuple[int, int]]] = [[] for _ in range(len(ent_ids))]
        inc: list[list[tuple[int, int]]] = [[] for _ in range(len(ent_ids))]
        for h, r, t in id_triples:
            out[h].append((r, t))
            inc[t].append((r, h))

        ent_labels = tuple(sorted(ent_ids, key=ent_ids.get))
        rel_labels = tuple(sorted(rel_ids, key=rel_ids.get))
        return Kg(
            entity_labels=ent_labels,
            relation_labels=rel_labels,
            triples=tuple(id_triples),
            out_index=tuple(tuple(x) for x in out),
            in_index=tuple(tuple(x) for x in inc),
            duplicates_dropped=dropped,
            entity_ids=ent_ids,
            relation_ids=rel_ids,
        )


def load_kg(triples_path: str | Path) -> Kg:
    """Load a triple file into a Kg; ids assigned by first appearance.

    Raises ``KgFormatError`` for malformed lines (with line number) or an
    empty file.  Exact duplicate triples are dropped; the count is kept in
    ``Kg.duplicates_dropped``.
    """
    rows = _read_rows(triples_path, 3)
    if not rows:
        raise KgFormatError(f"{triples_path}: empty triple file")
    return Kg.from_label_triples(rows)  # type: ignore[arg-type]


@dataclass(frozen=True)
class KgPair:
    """Source and target graphs of one alignment task."""

    source: Kg
    target: Kg

    def swapped(self) -> "KgPair":
        """Role swap; shares the underlying Kg objects (involution)."""
        return KgPair(source=self.target, target=self.source)


@dataclass(frozen=True)
class MappingSet:
    """Entity pairs between the two KGs, labelled or pseudo.

    ``scores`` optionally carries a per-pair confidence (used by pseudo
    generation for provenance dumps and the one-to-one accumulator).
    """

    pairs: tuple[tuple[int, int], ...]
    kind: str  # "labelled" | "pseudo"
    scores: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("labelled", "pseudo"):
            raise ValueError(f"bad MappingSet kind: {self.kind!r}")
        if len(set(self.pairs)) != len(self.pairs):
            raise ValueError("duplicate pairs in MappingSet")
        if self.scores is not None and len(self.scores) != len(self.pairs):
            raise ValueError("scores length mismatch")

    def __len__(self) -> int:
        return len(self.pairs)

    def as_set(self) -> set[tuple[int, int]]:
        return set(self.pairs)

    def source_ids(self) -> set[int]:
        return {s for s, _ in self.pairs}

    def target_ids(self) -> set[int]:
        return {t for _, t in self.pairs}

    def flipped(self) -> "MappingSet":
        return MappingSet(
            pairs=tuple((t, s) for s, t in self.pairs),
            kind=self.kind,
            scores=self.scores,
        )

    def union(self, other: "MappingSet", kind: str | None = None) -> "MappingSet":
        merged = list(self.pairs)
        present = set(self.pairs)
        for p in other.pairs:
            if p not in present:
                merged.append(p)
                present.add(p)
        return MappingSet(pairs=tuple(merged), kind=kind or self.kind)


def validate_mappings(mappings: MappingSet, pair: KgPair) -> None:
    """Check that all ids are valid in their respective KGs."""
    for s, t in mappings.pairs:
        if not (0 <= s < pair.source.n_entities):
            raise ValueError(f"source id {s} out of range")
        if not (0 <= t < pair.target.n_entities):
            raise ValueError(f"target id {t} out of range")


@dataclass(frozen=True)
class Partition:
    """Random split of ground-truth links into labelled and test sets."""

    labelled: MappingSet
    test: MappingSet
    ratio: float
    seed: int


def partition_mappings(links: MappingSet, ratio: float, seed: int) -> Partition:
    """Shuffle links with PCG64(seed) and take a prefix as labelled data.

    ``|labelled| = round(ratio * |links|)``.  Raises ``ValueError`` when the
    rounded split would leave either side empty.
    """
    if not (0.0 < ratio < 1.0):
        raise ValueError(f"ratio must be in (0,1), got {ratio}")
    if len(links) < 2:
        raise ValueError("need at least 2 links to partition")
    n_labelled = round(ratio * len(links))
    if n_labelled == 0:
        raise ValueError(f"ratio {ratio} yields 0 labelled pairs")
    if n_labelled == len(links):
        raise ValueError(f"ratio {ratio} yields an empty test set")
    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(len(links))
    shuffled = [links.pairs[i] for i in order]
    return Partition(
        labelled=MappingSet(tuple(shuffled[:n_labelled]), kind="labelled"),
        test=MappingSet(tuple(shuffled[n_labelled:]), kind="labelled"),
        ratio=ratio,
        seed=seed,
    )


@dataclass(frozen=True)
class FactorSubset:
    """An entity together with its one-hop (undirected) neighbors."""

    anchor: int
    members: frozenset[int]


def factor_subset(kg: Kg, e: int) -> FactorSubset:
    """``{e}`` plus all out- and in-neighbors of ``e``."""
    return FactorSubset(anchor=e, members=frozenset((e,) + kg.neighbors(e)))


@dataclass(frozen=True)
class MarkovBlanket:
    """An entity plus everything within two undirected hops."""

    anchor: int
    members: frozenset[int]


def markov_blanket(kg: Kg, u: int) -> MarkovBlanket:
    """Union of all factor subsets containing ``u``."""
    members = {u}
    for n in kg.neighbors(u):
        members.add(n)
        members.update(kg.neighbors(n))
    return MarkovBlanket(anchor=u, members=frozenset(members))


def load_links_file(path: str | Path) -> list[tuple[str, str]]:
    rows = _read_rows(path, 2)
    if not rows:
        raise KgFormatError(f"{path}: empty links file")
    return rows  # type: ignore[return-value]


def load_dataset(dataset_dir: str | Path) -> tuple[KgPair, MappingSet]:
    """Load a benchmark-layout directory: rel_triples_1/2 + ent_links.

    Link entities that never appear in a triple are interned as isolated
    entities so they can still be ranked by similarity.
    """
    d = Path(dataset_dir)
    for name in ("rel_triples_1", "rel_triples_2", "ent_links"):
        if not (d / name).exists():
            raise KgFormatError(f"missing {name} in {d}")
    t1 = _read_rows(d / "rel_triples_1", 3)
    t2 = _read_rows(d / "rel_triples_2", 3)
    raw_links = load_links_file(d / "ent_links")
    extra1 = tuple(dict.fromkeys(s for s, _ in raw_links))
    extra2 = tuple(dict.fromkeys(t for _, t in raw_links))
    kg1 = Kg.from_label_triples(t1, extra_entities=extra1)  # type: ignore[arg-type]
    kg2 = Kg.from_label_triples(t2, extra_entities=extra2)  # type: ignore[arg-type]
    pairs = []
    seen = set()
    for s, t in raw_links:
        p = (kg1.entity_ids[s], kg2.entity_ids[t])
        if p not in seen:
            seen.add(p)
            pairs.append(p)
    links = MappingSet(tuple(pairs), kind="labelled")
    pair = KgPair(source=kg1, target=kg2)
    validate_mappings(links, pair)
    return pair, links


def write_links(
    path: str | Path,
    mappings: MappingSet,
    source_labels,
    target_labels,
) -> None:
    """Serialize a MappingSet back to the two-column links format."""
    with open(path, "w", encoding="utf-8") as fh:
        for s, t in mappings.pairs:
            fh.write(f"{source_labels[s]}\t{target_labels[t]}\n")


def write_pseudo_tsv(
    path: str | Path,
    pair: KgPair,
    mappings: MappingSet,
    iteration: int,
    strategy: str,
) -> None:
    """Links format plus provenance columns: iteration, strategy, score."""
    scores = mappings.scores or (float("nan"),) * len(mappings)
    with open(path, "w", encoding="utf-8") as fh:
        for (s, t), score in zip(mappings.pairs, scores):
            fh.write(
                f"{pair.source.entity_labels[s]}\t{pair.target.entity_labels[t]}"
                f"\t{iteration}\t{strategy}\t{score:.6g}\n"
            )


def write_partition(
    out_dir: str | Path,
    part: Partition,
    source_labels,
    target_labels,
) -> None:
    """Write labelled.tsv, test.tsv and a small key-value manifest."""
    out = Path(out_dir)
    os.makedirs(out, exist_ok=True)
    write_links(out / "labelled.tsv", part.labelled, source_labels, target_labels)
    write_links(out / "test.tsv", part.test, source_labels, target_labels)
    with open(out / "partition_manifest.txt", "w", encoding="utf-8") as fh:
        fh.write(f"ratio = {part.ratio}\n")
        fh.write(f"seed = {part.seed}\n")
        fh.write(f"n_labelled = {len(part.labelled)}\n")
        fh.write(f"n_test = {len(part.test)}\n")
