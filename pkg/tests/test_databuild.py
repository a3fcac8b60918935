import numpy as np
import pytest

from docmt.databuild import (DocumentPair, GaussianParams, PseudoDocument, SentencePair,
                             build_fixed_length_testset, build_gaussian_corpus, build_uniform_corpus,
                             check_reconstruction, corpus_stats, document_rng, fit_length_distribution,
                             gaussian_params_for, make_document, pack_document, sentence_level_testset,
                             stats_table_long, stats_table_wide, whole_document_testset)
from docmt.errors import EmptyCorpus, InsufficientData, InsufficientVariance
from docmt.tokenizer import LengthScheme


def doc_of(lengths, doc_id="d"):
    return DocumentPair(doc_id, [SentencePair(f"s{i}", f"t{i}", n, n, f"{doc_id}:{i}")
                                 for i, n in enumerate(lengths)])


def spans(corpus):
    return [(p.start, p.end) for p in corpus]


def synthetic_docs(seed, n_docs=40, mean_sents=40):
    rng = np.random.default_rng(seed)
    docs = []
    for k in range(n_docs):
        n = max(1, int(rng.normal(mean_sents, mean_sents / 3)))
        docs.append(doc_of(rng.integers(5, 60, size=n).tolist(), f"doc{k}"))
    return docs


def constant(b):
    return lambda rng: b


class TestFit:
    def test_sample_std(self):
        p = fit_length_distribution([2000, 3000, 4000])
        assert p.mean == pytest.approx(3000)
        assert p.std == pytest.approx(1000)

    def test_degenerate(self):
        with pytest.raises(InsufficientVariance):
            fit_length_distribution([100, 100, 100])

    def test_too_few(self):
        with pytest.raises(InsufficientData):
            fit_length_distribution([100])

    def test_params_need_positive_std(self):
        with pytest.raises(InsufficientVariance):
            GaussianParams(10.0, 0.0)

    def test_rescaling_maps_longest_document_to_l_max(self):
        docs = [doc_of([100] * k, f"d{k}") for k in (1, 2, 4)]
        p = gaussian_params_for(docs, 200)
        assert p.mean == pytest.approx(700 / 3 * 200 / 400)


class TestPacking:
    def test_greedy_budget_25(self):
        out = pack_document(doc_of([10, 10, 10]), constant(25), None, 1024)
        assert spans(out) == [(0, 2), (2, 3)]
        assert [p.src_len for p in out] == [20, 10]

    def test_long_sentence_alone(self):
        out = pack_document(doc_of([10, 300, 10]), constant(25), None, 100)
        assert spans(out) == [(0, 1), (1, 2), (2, 3)]
        assert [p.overflow for p in out] == [False, True, False]

    def test_budget_redrawn_per_fragment(self):
        budgets = iter([15, 35])
        out = pack_document(doc_of([10, 10, 10, 10]), lambda rng: next(budgets), None, 100)
        assert spans(out) == [(0, 1), (1, 4)]
        assert [p.budget for p in out] == [15, 35]

    def test_uniform_short_document(self):
        out = build_uniform_corpus([doc_of([30, 40, 20])], 1024, seed=1)
        assert spans(out) == [(0, 3)]

    def test_uniform_keeps_short_tail(self):
        out = build_uniform_corpus([doc_of([100, 100, 5])], 256, seed=0, draw_budget=constant(200))
        assert spans(out) == [(0, 2), (2, 3)]
        assert not out[-1].tail_merged


class TestFixedLength:
    def test_plain(self):
        assert spans(build_fixed_length_testset([doc_of([100, 100, 100])], 256)) == [(0, 2), (2, 3)]

    def test_tail_merge(self):
        out = build_fixed_length_testset([doc_of([120, 120, 40])], 256)
        assert spans(out) == [(0, 3)]
        assert out[0].src_len == 280 and out[0].tail_merged

    def test_tail_at_threshold_kept(self):
        out = build_fixed_length_testset([doc_of([120, 120, 50])], 256)
        assert spans(out) == [(0, 2), (2, 3)]

    def test_single_short_document_untouched(self):
        out = build_fixed_length_testset([doc_of([10])], 256)
        assert spans(out) == [(0, 1)] and not out[0].tail_merged

    def test_fragments_close_to_l_max(self):
        docs = synthetic_docs(3)
        l_max = 512
        for doc in docs:
            frags = build_fixed_length_testset([doc], l_max)
            longest = max(p.src_len for p in doc.pairs)
            for p in frags[:-1]:
                if not p.tail_merged:
                    assert l_max - longest < p.src_len <= l_max

    def test_fixture_ladder(self, data_dir):
        from docmt.io import read_parallel
        docs = [make_document(d, s, t) for d, s, t in
                read_parallel(data_dir / "fixture.en", data_dir / "fixture.fr")]
        counts = [len(build_fixed_length_testset(docs, L)) for L in (32, 64, 128)]
        assert counts == [15, 7, 4]


class TestProperties:
    @pytest.mark.parametrize("seed", range(5))
    def test_reconstruction_all_builders(self, seed):
        docs = synthetic_docs(seed)
        params = gaussian_params_for(docs, 1024)
        for corpus in (build_gaussian_corpus(docs, 1024, params, seed),
                       build_uniform_corpus(docs, 1024, seed),
                       build_fixed_length_testset(docs, 256),
                       sentence_level_testset(docs),
                       whole_document_testset(docs)):
            assert check_reconstruction(docs, corpus)

    def test_reconstruction_detects_gap(self):
        docs = [doc_of([1, 2, 3])]
        assert not check_reconstruction(docs, [PseudoDocument("d", 0, 1, 1), PseudoDocument("d", 2, 3, 3)])

    def test_budget_respect_or_flagged(self):
        docs = synthetic_docs(7)
        docs.append(doc_of([2000, 10], "huge"))
        for corpus in (build_gaussian_corpus(docs, 512, gaussian_params_for(docs, 512), 0),
                       build_uniform_corpus(docs, 512, 0),
                       build_fixed_length_testset(docs, 512)):
            for p in corpus:
                assert p.src_len <= 512 or p.overflow or p.tail_merged

    def test_determinism_and_order_independence(self):
        docs = synthetic_docs(11)
        params = gaussian_params_for(docs, 1024)
        a = build_gaussian_corpus(docs, 1024, params, seed=5)
        b = build_gaussian_corpus(list(reversed(docs)), 1024, params, seed=5)
        key = lambda c: sorted(spans_by_doc(c).items())
        assert a == build_gaussian_corpus(docs, 1024, params, seed=5)
        assert key(a) == key(b)
        assert a != build_gaussian_corpus(docs, 1024, params, seed=6)

    def test_document_rng_depends_on_id_only(self):
        assert document_rng(1, "x").random() == document_rng(1, "x").random()
        assert document_rng(1, "x").random() != document_rng(1, "y").random()

    def test_gaussian_mean_well_below_l_max(self):
        rng = np.random.default_rng(0)
        docs = []
        for k in range(200):
            total = max(200, int(rng.normal(3000, 1000)))
            lens = []
            while sum(lens) < total:
                lens.append(int(rng.integers(5, 40)))
            docs.append(doc_of(lens, f"g{k}"))
        corpus = build_gaussian_corpus(docs, 1024, gaussian_params_for(docs, 1024), seed=0)
        assert corpus_stats(corpus)["src"].mean < 1024 / 2

    def test_uniform_mean_in_middle(self):
        docs = synthetic_docs(2, n_docs=60, mean_sents=80)
        corpus = build_uniform_corpus(docs, 1024, seed=0)
        # drop each document's trailing fragment, whose length is not budget-driven
        body = [p for p in corpus if p.end != len(next(d for d in docs if d.doc_id == p.doc_id).pairs)]
        assert 1024 / 4 < corpus_stats(body)["src"].mean < 3 * 1024 / 4
        assert 1024 / 4 < corpus_stats(corpus)["src"].mean < 3 * 1024 / 4


def spans_by_doc(corpus):
    out = {}
    for p in corpus:
        out.setdefault(p.doc_id, []).append((p.start, p.end, p.budget))
    return out


class TestStats:
    def test_single(self):
        s = corpus_stats([PseudoDocument("d", 0, 1, 5, 5)])["src"]
        assert (s.count, s.mean, s.min, s.max) == (1, 5, 5, 5)

    def test_empty(self):
        with pytest.raises(EmptyCorpus):
            corpus_stats([])

    def test_min_mean_max(self):
        corpus = build_fixed_length_testset(synthetic_docs(4), 300)
        for s in corpus_stats(corpus).values():
            assert s.min <= s.mean <= s.max

    def test_tables(self):
        rows = {"256": corpus_stats([PseudoDocument("d", 0, 1, 5, 6), PseudoDocument("d", 1, 2, 8, 9)])}
        assert stats_table_long(rows) == ("split\tside\tcount\tmean\tmin\tmax\n"
                                          "256\tsrc\t2\t6\t5\t8\n256\ttgt\t2\t8\t6\t9\n")
        assert stats_table_wide(rows) == "\t256\nCount\t2\nLength\t6\n"


class TestMakeDocument:
    def test_lengths_and_ids(self):
        d = make_document("t", ["Hello, world!", "Bye."], ["Bonjour le monde !", "Salut."])
        assert [p.src_len for p in d.pairs] == [4, 2]
        assert [p.sent_id for p in d.pairs] == ["t:0", "t:1"]

    def test_external(self):
        scheme = LengthScheme("external", {"t:0": 7, "t:0:tgt": 9})
        d = make_document("t", ["a"], ["b"], scheme)
        assert (d.pairs[0].src_len, d.pairs[0].tgt_len) == (7, 9)

    def test_mismatch(self):
        with pytest.raises(ValueError):
            make_document("t", ["a"], [])
