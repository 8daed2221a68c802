import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latrec.core import Hypothesis, Lattice, NBestList, enumerate_paths
from latrec.errors import EmptyReferenceError
from latrec.metrics import (align, corpus_report, filter_pairs,
                            oracle_wer_lattice, oracle_wer_nbest, wer)
from latrec.retokenize import BoundaryConvention, path_words

from helpers import quadratic_edit_distance, random_bpe_lattice

M = "▁"


class TestWer:
    def test_identical(self):
        assert wer("a b c".split(), "a b c".split()).wer == 0.0

    def test_one_substitution(self):
        # hand DP: single diagonal mismatch
        stats = wer("a b c".split(), "a x c".split())
        assert (stats.subs, stats.ins, stats.dels) == (1, 0, 0)
        assert stats.wer == pytest.approx(1 / 3)

    def test_one_insertion(self):
        stats = wer("a b".split(), "a b c".split())
        assert (stats.subs, stats.ins, stats.dels) == (0, 1, 0)
        assert stats.wer == 0.5

    def test_one_deletion(self):
        stats = wer("a b c".split(), "a c".split())
        assert (stats.subs, stats.ins, stats.dels) == (0, 0, 1)

    def test_empty_reference_raises(self):
        with pytest.raises(EmptyReferenceError):
            wer([], ["a"])

    def test_empty_hypothesis_is_all_deletions(self):
        stats = wer("a b".split(), [])
        assert (stats.subs, stats.ins, stats.dels) == (0, 0, 2)

    def test_alignment_replays_ref_into_hyp(self):
        rng = np.random.default_rng(1)
        alphabet = list("abcd")
        for _ in range(200):
            ref = [alphabet[rng.integers(4)] for _ in range(rng.integers(1, 9))]
            hyp = [alphabet[rng.integers(4)] for _ in range(rng.integers(0, 9))]
            alignment = align(ref, hyp)
            rebuilt = []
            for op in alignment.ops:
                if op.kind in ("match", "substitute", "insert"):
                    rebuilt.append(hyp[op.hyp_idx])
            assert rebuilt == hyp
            consumed = [op.ref_idx for op in alignment.ops if op.kind != "insert"]
            assert consumed == list(range(len(ref)))
            subs, ins, dels = alignment.counts()
            assert subs + ins + dels == quadratic_edit_distance(ref, hyp)

    def test_cost_is_symmetric(self):
        rng = np.random.default_rng(2)
        alphabet = list("abc")
        for _ in range(100):
            x = [alphabet[rng.integers(3)] for _ in range(rng.integers(1, 8))]
            y = [alphabet[rng.integers(3)] for _ in range(rng.integers(1, 8))]
            assert wer(x, y).edits == wer(y, x).edits


@settings(max_examples=200)
@given(st.lists(st.sampled_from("ab"), min_size=1, max_size=6),
       st.lists(st.sampled_from("ab"), min_size=1, max_size=6),
       st.lists(st.sampled_from("ab"), min_size=1, max_size=6))
def test_triangle_inequality(a, b, c):
    assert wer(a, c).edits <= wer(a, b).edits + wer(b, c).edits


class TestOracleNbest:
    def test_reference_in_list_gives_zero(self):
        nb = NBestList("u", (Hypothesis("a x", -1.0), Hypothesis("a b", -2.0)))
        stats, rank = oracle_wer_nbest(["a", "b"], nb)
        assert stats.wer == 0.0 and rank == 2

    def test_tie_goes_to_lowest_rank(self):
        nb = NBestList("u", (Hypothesis("a x c", -1.0), Hypothesis("a b d", -2.0)))
        stats, rank = oracle_wer_nbest(["a", "b", "c"], nb)
        assert stats.wer == pytest.approx(1 / 3)
        assert rank == 1

    def test_single_hypothesis_equals_plain_wer(self):
        nb = NBestList("u", (Hypothesis("a x", -1.0),))
        stats, rank = oracle_wer_nbest(["a", "b"], nb)
        assert stats.edits == wer(["a", "b"], ["a", "x"]).edits
        assert rank == 1


class TestOracleLattice:
    def chain(self, words, score=-1.0):
        arcs = [(i, i + 1, M + w, score) for i, w in enumerate(words)]
        arcs.append((len(words), len(words) + 1, "</s>", 0.0))
        return Lattice.from_arcs(arcs, start=0, end=len(words) + 1)

    def test_single_path_equal_to_ref(self):
        lat = self.chain(["a", "b"])
        stats, witness = oracle_wer_lattice(["a", "b"], lat)
        assert stats.wer == 0.0
        assert path_words(witness.tokens) == ["a", "b"]

    def test_two_path_lattice_picks_matching_branch(self):
        arcs = [(0, 1, M + "a", -1.0), (1, 2, M + "b", -1.0), (1, 2, M + "c", -2.0),
                (2, 3, "</s>", 0.0)]
        lat = Lattice.from_arcs(arcs, start=0, end=3)
        stats, witness = oracle_wer_lattice(["a", "c"], lat)
        assert stats.wer == 0.0
        assert path_words(witness.tokens) == ["a", "c"]

    def test_matches_brute_force_on_random_lattices(self):
        rng = np.random.default_rng(9)
        conv = BoundaryConvention()
        for _ in range(40):
            lat = random_bpe_lattice(rng, max_paths=200)
            paths = enumerate_paths(lat).paths
            some_words = path_words(paths[rng.integers(len(paths))].tokens, conv)
            ref = list(some_words)
            if ref and rng.random() < 0.7:
                ref[rng.integers(len(ref))] = "zzz"  # force at least one edit
            if not ref:
                ref = ["zzz"]
            expected = min(wer(ref, path_words(p.tokens, conv)).edits for p in paths)
            stats, witness = oracle_wer_lattice(ref, lat, conv)
            assert stats.edits == expected
            assert wer(ref, path_words(witness.tokens, conv)).edits == expected


class TestFilterPairs:
    def test_exactly_at_threshold_kept(self):
        pairs = [(["a", "b", "c", "d"], ["a", "b", "c", "x"])]  # wer 0.25
        assert filter_pairs(pairs, 0.25) == pairs

    def test_above_threshold_dropped(self):
        pairs = [(["a"] * 10, ["a"] * 7 + ["x"] * 3)]  # wer 0.3
        assert filter_pairs(pairs, 0.25) == []

    def test_identical_pair_kept(self):
        pairs = [(["a"], ["a"])]
        assert filter_pairs(pairs) == pairs

    def test_empty_reference_reports_index(self):
        with pytest.raises(EmptyReferenceError, match="pair 1"):
            filter_pairs([(["a"], ["a"]), ([], ["b"])])


class TestCorpusReport:
    def test_single_utterance(self):
        stats = wer(["a", "b"], ["a", "x"])
        report = corpus_report([("u1", stats)])
        assert report.wer == stats.wer

    def test_pooled_arithmetic(self):
        r1 = wer(["a", "b"], ["a", "x"])   # 1 edit / 2 words
        r2 = wer(["c", "d"], ["c", "d"])   # 0 edits / 2 words
        report = corpus_report([("u1", r1), ("u2", r2)])
        assert report.wer == 0.25

    def test_pooled_differs_from_mean_on_unequal_lengths(self):
        r1 = wer(["a"], ["x"])                        # wer 1.0 on 1 word
        r2 = wer(["w"] * 100, ["w"] * 100)            # wer 0.0 on 100 words
        report = corpus_report([("u1", r1), ("u2", r2)])
        mean = (r1.wer + r2.wer) / 2
        assert report.wer == pytest.approx(1 / 101)
        assert report.wer != pytest.approx(mean)

    def test_tables_render(self):
        report = corpus_report([("u1", wer(["a"], ["a"]))])
        assert "ALL" in report.to_text()
        assert report.to_tsv_rows()[0].startswith("id\t")
