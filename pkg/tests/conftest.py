from pathlib import Path

import pytest

from kgalign.kg import Kg, KgPair
from kgalign.synth import write_twin_dataset

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def dbp_sample_dir() -> Path:
    return DATA_DIR / "dbp15k_sample"


@pytest.fixture(scope="session")
def twin_dataset_dir(tmp_path_factory) -> Path:
    """A small synthetic twin dataset shared by orchestrator/CLI tests."""
    root = tmp_path_factory.mktemp("twin")
    return write_twin_dataset(
        root / "ds", n_entities=80, n_triples=320, n_relations=5,
        perturbation=0.1, seed=11,
    )


def kg_from(triples: list[tuple[str, str, str]], extra: tuple[str, ...] = ()) -> Kg:
    return Kg.from_label_triples(triples, extra_entities=extra)


@pytest.fixture
def chain_kg() -> Kg:
    # a -> b -> c -> d
    return kg_from([("a", "r", "b"), ("b", "r", "c"), ("c", "r", "d")])


@pytest.fixture
def mirror_pair() -> KgPair:
    """Two structurally identical 5-entity graphs."""
    src = kg_from([
        ("a", "r0", "b"), ("a", "r1", "c"), ("c", "r0", "d"), ("d", "r1", "e"),
    ])
    tgt = kg_from([
        ("a'", "s0", "b'"), ("a'", "s1", "c'"), ("c'", "s0", "d'"), ("d'", "s1", "e'"),
    ])
    return KgPair(source=src, target=tgt)
