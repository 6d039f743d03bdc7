import numpy as np
import pytest

from kgalign.models import SimMatrix, TopKSimMatrix, top_k_of
from kgalign.simio import (
    SimFormatError,
    read_sim_matrix,
    validate_against,
    write_sim_matrix,
)


def test_dense_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(0)
    m = SimMatrix(scores=rng.normal(size=(4, 6)), direction="tgt_to_src")
    p = tmp_path / "m.tsv"
    write_sim_matrix(p, m)
    back = read_sim_matrix(p)
    assert back.direction == "tgt_to_src"
    assert np.array_equal(back.scores, m.scores)  # repr round-trips floats


def test_topk_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(1)
    top = top_k_of(SimMatrix(scores=rng.normal(size=(5, 9))), k=3, fill=-2.0)
    p = tmp_path / "m.tsv"
    write_sim_matrix(p, top)
    back = read_sim_matrix(p)
    assert isinstance(back, TopKSimMatrix)
    assert np.array_equal(back.cand_ids, top.cand_ids)
    assert np.array_equal(back.scores, top.scores)
    assert back.fill == top.fill
    assert back.n_cols == 9


def test_missing_header_rejected(tmp_path):
    p = tmp_path / "m.tsv"
    p.write_text("1.0\t2.0\n", encoding="utf-8")
    with pytest.raises(SimFormatError, match="header"):
        read_sim_matrix(p)


def test_row_count_mismatch_rejected(tmp_path):
    p = tmp_path / "m.tsv"
    p.write_text(
        "#sim-format v1\n#direction src_to_tgt\n#rows 2\n#cols 2\n#layout dense\n"
        "0.0\t1.0\n",
        encoding="utf-8",
    )
    with pytest.raises(SimFormatError, match="rows"):
        read_sim_matrix(p)


def test_column_mismatch_rejected(tmp_path):
    p = tmp_path / "m.tsv"
    p.write_text(
        "#sim-format v1\n#direction src_to_tgt\n#rows 1\n#cols 3\n#layout dense\n"
        "0.0\t1.0\n",
        encoding="utf-8",
    )
    with pytest.raises(SimFormatError, match="columns"):
        read_sim_matrix(p)


def test_validate_against_dimensions():
    m = SimMatrix(scores=np.zeros((3, 4)))
    validate_against(m, 3, 4)
    with pytest.raises(SimFormatError):
        validate_against(m, 4, 3)
    rev = SimMatrix(scores=np.zeros((4, 3)), direction="tgt_to_src")
    validate_against(rev, 3, 4)
