import numpy as np
import pytest

from kgalign.kg import MappingSet, partition_mappings
from kgalign.models import (
    SRC_TO_TGT,
    TGT_TO_SRC,
    EmbeddingAligner,
    EmbeddingAlignerParams,
    SimMatrix,
    SyntheticOracle,
    TopKSimMatrix,
    margin_ranking_loss_and_grad,
    top_k_of,
)
from kgalign.synth import twin_dataset


@pytest.fixture(scope="module")
def small_twins():
    return twin_dataset(n_entities=40, n_triples=160, n_relations=4,
                        perturbation=0.0, seed=2)


class TestEmbeddingAligner:
    def test_requires_nonempty_train(self, small_twins):
        pair, _ = small_twins
        model = EmbeddingAligner(seed=1)
        with pytest.raises(ValueError):
            model.fit(pair, MappingSet((), kind="labelled"), epochs=1)

    def test_zero_epochs_rejected(self, small_twins):
        pair, links = small_twins
        model = EmbeddingAligner(seed=1)
        with pytest.raises(ValueError):
            model.fit(pair, links, epochs=0)

    def test_unfitted_similarities_rejected(self):
        with pytest.raises(RuntimeError):
            EmbeddingAligner(seed=1).similarities(SRC_TO_TGT)

    def test_loss_decreases_on_twins(self, small_twins):
        pair, links = small_twins
        part = partition_mappings(links, 0.05, seed=7)
        model = EmbeddingAligner(seed=1)
        trace = model.fit(pair, part.labelled, epochs=50)
        assert trace[-1] < trace[0]

    def test_unit_norm_after_every_epoch(self, small_twins):
        pair, links = small_twins
        model = EmbeddingAligner(seed=1)
        for _ in range(3):
            model.fit(pair, links, epochs=1)
            norms = np.linalg.norm(model._ent, axis=1)
            np.testing.assert_allclose(norms, 1.0, atol=1e-6)

    def test_merged_pairs_have_cosine_one(self, small_twins):
        pair, links = small_twins
        model = EmbeddingAligner(seed=1)
        model.fit(pair, links, epochs=2)
        sims = model.similarities(SRC_TO_TGT).scores
        for s, t in links.pairs[:10]:
            assert sims[s, t] == pytest.approx(1.0, abs=1e-9)

    def test_similarities_bounded_and_pure(self, small_twins):
        pair, links = small_twins
        model = EmbeddingAligner(seed=1)
        model.fit(pair, links, epochs=2)
        a = model.similarities(SRC_TO_TGT)
        b = model.similarities(SRC_TO_TGT)
        assert np.array_equal(a.scores, b.scores)
        assert a.scores.max() <= 1.0 + 1e-9
        assert a.scores.min() >= -1.0 - 1e-9
        rev = model.similarities(TGT_TO_SRC)
        assert np.array_equal(rev.scores, a.scores.T)

    def test_pseudo_pairs_accepted_in_refit(self, small_twins):
        pair, links = small_twins
        part = partition_mappings(links, 0.2, seed=7)
        model = EmbeddingAligner(seed=1)
        model.fit(pair, part.labelled, epochs=1)
        pseudo = MappingSet(part.test.pairs[:5], kind="pseudo")
        model.fit(pair, part.labelled.union(pseudo), epochs=1)

    def test_deterministic_for_fixed_seed(self, small_twins):
        pair, links = small_twins
        part = partition_mappings(links, 0.2, seed=7)
        runs = []
        for _ in range(2):
            model = EmbeddingAligner(seed=9)
            model.fit(pair, part.labelled, epochs=3)
            runs.append(model.similarities(SRC_TO_TGT).scores)
        assert np.array_equal(runs[0], runs[1])

    def test_orthogonal_embeddings_have_zero_similarity(self, small_twins):
        pair, links = small_twins
        model = EmbeddingAligner(EmbeddingAlignerParams(dim=4), seed=1)
        model.fit(pair, links, epochs=1)
        ent = np.zeros_like(model._ent)
        ent[:, 0] = 1.0
        ent[pair.source.n_entities :, 0] = 0.0
        ent[pair.source.n_entities :, 1] = 1.0
        model._ent = ent
        sims = model.similarities(SRC_TO_TGT).scores
        np.testing.assert_allclose(sims, 0.0, atol=1e-12)


class TestMarginLossGradient:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        ent = rng.normal(size=(5, 6))
        rel = rng.normal(size=(2, 6))
        pos = np.array([[0, 0, 1], [1, 1, 2], [3, 0, 4]])
        neg = np.array([[2, 0, 1], [1, 1, 4], [0, 0, 4]])
        margin = 1.0
        loss, g_ent, g_rel = margin_ranking_loss_and_grad(ent, rel, pos, neg, margin)

        # keep the check meaningful: every pair strictly on one hinge side
        d_pos = np.linalg.norm(ent[pos[:, 0]] + rel[pos[:, 1]] - ent[pos[:, 2]], axis=1)
        d_neg = np.linalg.norm(ent[neg[:, 0]] + rel[neg[:, 1]] - ent[neg[:, 2]], axis=1)
        assert np.all(np.abs(margin + d_pos - d_neg) > 1e-3)

        h = 1e-6
        for table, grad in ((ent, g_ent), (rel, g_rel)):
            num = np.zeros_like(table)
            for i in range(table.shape[0]):
                for j in range(table.shape[1]):
                    table[i, j] += h
                    lp, _, _ = margin_ranking_loss_and_grad(ent, rel, pos, neg, margin)
                    table[i, j] -= 2 * h
                    lm, _, _ = margin_ranking_loss_and_grad(ent, rel, pos, neg, margin)
                    table[i, j] += h
                    num[i, j] = (lp - lm) / (2 * h)
            rel_err = np.abs(grad - num) / np.maximum(
                1.0, np.maximum(np.abs(grad), np.abs(num))
            )
            assert rel_err.max() < 1e-4


class TestSyntheticOracle:
    def test_noise_zero_perfect_argmax(self, small_twins):
        pair, links = small_twins
        oracle = SyntheticOracle(pair, links, noise_rate=0.0, seed=3)
        sims = oracle.similarities(SRC_TO_TGT).scores
        for s, t in links.pairs:
            assert sims[s].argmax() == t

    def test_noise_one_never_correct(self, small_twins):
        pair, links = small_twins
        oracle = SyntheticOracle(pair, links, noise_rate=1.0, seed=3)
        sims = oracle.similarities(SRC_TO_TGT).scores
        for s, t in links.pairs:
            assert sims[s].argmax() != t

    def test_exact_noised_count(self):
        pair, links = twin_dataset(n_entities=100, n_triples=300, n_relations=4, seed=5)
        oracle = SyntheticOracle(pair, links, noise_rate=0.3, seed=8)
        sims = oracle.similarities(SRC_TO_TGT).scores
        truth = dict(links.pairs)
        correct = sum(1 for s in truth if sims[s].argmax() == truth[s])
        assert correct == 70

    def test_deterministic(self, small_twins):
        pair, links = small_twins
        a = SyntheticOracle(pair, links, noise_rate=0.4, seed=6)
        b = SyntheticOracle(pair, links, noise_rate=0.4, seed=6)
        assert np.array_equal(
            a.similarities(SRC_TO_TGT).scores, b.similarities(SRC_TO_TGT).scores
        )

    def test_fit_is_a_noop_but_validates(self, small_twins):
        pair, links = small_twins
        oracle = SyntheticOracle(pair, links, seed=1)
        before = oracle.similarities(SRC_TO_TGT).scores
        oracle.fit(pair, links, epochs=3)
        assert np.array_equal(before, oracle.similarities(SRC_TO_TGT).scores)
        with pytest.raises(ValueError):
            oracle.fit(pair, MappingSet((), kind="labelled"), epochs=1)


class TestSimMatrix:
    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            SimMatrix(scores=np.array([[np.nan, 0.0]]))

    def test_topk_roundtrip_dense(self):
        rng = np.random.default_rng(0)
        dense = SimMatrix(scores=rng.normal(size=(6, 9)))
        top = top_k_of(dense, k=3, fill=-5.0)
        assert isinstance(top, TopKSimMatrix)
        back = top.to_dense()
        rows = np.arange(6)[:, None]
        np.testing.assert_allclose(
            back.scores[rows, top.cand_ids], dense.scores[rows, top.cand_ids]
        )
        # argmax survives the truncation
        assert np.array_equal(back.scores.argmax(axis=1), dense.scores.argmax(axis=1))

    def test_topk_rows_sorted_descending(self):
        dense = SimMatrix(scores=np.array([[0.1, 0.5, 0.3], [0.9, 0.2, 0.4]]))
        top = top_k_of(dense, k=2)
        assert np.all(np.diff(top.scores, axis=1) <= 0)
