import numpy as np
import pytest

from latrec.core import Arc, Lattice, enumerate_paths, validate_lattice
from latrec.errors import SegmentationError, TokenizerError
from latrec.retokenize import (BoundaryConvention, GreedyVocabTokenizer,
                               IdentityTokenizer, bpe_to_word, join_pieces,
                               path_words, word_to_plm_bpe)

from helpers import random_bpe_lattice

M = "▁"
CONV = BoundaryConvention()


def word_seqs(lat, bpe=True):
    if bpe:
        return {tuple(path_words(p.tokens, CONV)) for p in enumerate_paths(lat)}
    return {tuple(t for t in p.tokens if t != CONV.terminal) for p in enumerate_paths(lat)}


class TestPathWords:
    def test_two_single_piece_words(self):
        assert path_words([M + "a", M + "b"]) == ["a", "b"]

    def test_multi_piece_word_with_terminal(self):
        assert path_words([M + "ca", "t", "</s>"]) == ["cat"]

    def test_missing_initial_boundary_raises(self):
        with pytest.raises(SegmentationError):
            path_words(["ca", "t"])


class TestBpeToWord:
    def test_chain_sums_scores(self):
        lat = Lattice.from_arcs(
            [(0, 1, M + "ca", -0.2), (1, 2, "t", -0.1), (2, 3, M + "sat", -0.3)],
            start=0, end=3)
        out = bpe_to_word(lat, CONV)
        assert validate_lattice(out).ok
        scores = {a.label: a.score for a in out.arcs}
        assert set(scores) == {"cat", "sat"}
        assert scores["cat"] == pytest.approx(-0.3, abs=1e-12)
        assert scores["sat"] == -0.3
        path = enumerate_paths(out).paths[0]
        assert [a.label for a in path.arcs] == ["cat", "sat"]
        assert path.score == pytest.approx(-0.6)

    def test_midword_fork_makes_two_word_arcs_between_same_endpoints(self):
        lat = Lattice.from_arcs(
            [(0, 1, M + "k", -0.1), (1, 2, "night", -0.2), (1, 2, "nit", -0.3),
             (2, 3, "</s>", 0.0)],
            start=0, end=3)
        out = bpe_to_word(lat, CONV)
        assert validate_lattice(out).ok
        words = {(a.src, a.dst, a.label) for a in out.arcs if a.label != "</s>"}
        assert {lab for _, _, lab in words} == {"knight", "knit"}
        assert len({(s, d) for s, d, _ in words}) == 1
        assert word_seqs(lat) == word_seqs(out, bpe=False)

    def test_word_level_input_is_fixed_point_on_path_sets(self):
        lat = Lattice.from_arcs(
            [(0, 1, M + "a", -1.0), (0, 1, M + "b", -2.0), (1, 2, M + "c", -0.5)],
            start=0, end=2)
        out = bpe_to_word(lat, CONV)
        assert word_seqs(lat) == word_seqs(out, bpe=False)
        assert {p.score for p in enumerate_paths(out)} == \
               {p.score for p in enumerate_paths(lat)}

    def test_duplicate_word_arcs_keep_max_score(self):
        # "cat" spelled two ways between the same nodes
        lat = Lattice.from_arcs(
            [(0, 1, M + "ca", -0.2), (1, 3, "t", -0.1),
             (0, 2, M + "c", -0.5), (2, 3, "at", -0.5),
             (3, 4, "</s>", 0.0)],
            start=0, end=4)
        out = bpe_to_word(lat, CONV)
        cat_arcs = [a for a in out.arcs if a.label == "cat"]
        assert len(cat_arcs) == 1
        assert cat_arcs[0].score == pytest.approx(-0.3)

    def test_mixed_boundary_usage_is_segmentation_error(self):
        # node 1 ends a word on one path but continues one on another
        lat = Lattice.from_arcs(
            [(0, 1, M + "a", -0.1), (1, 2, "x", -0.1), (1, 2, M + "b", -0.1),
             (2, 3, "</s>", 0.0)],
            start=0, end=3)
        with pytest.raises(SegmentationError, match="node 1"):
            bpe_to_word(lat, CONV)


class TestWordToPlm:
    def test_split_places_score_on_first_piece(self):
        lat = Lattice.from_arcs([(0, 1, "cat", -0.3)], start=0, end=1)

        class Fixed(GreedyVocabTokenizer):
            def __init__(self):
                self.convention = CONV

            def split(self, word):
                return [M + "c", "at"]

        out = word_to_plm_bpe(lat, Fixed())
        assert validate_lattice(out).ok
        arcs = sorted(out.arcs, key=lambda a: a.src)
        assert [(a.label, a.score) for a in arcs] == [(M + "c", -0.3), ("at", 0.0)]

    def test_identity_tokenizer_is_isomorphic(self):
        lat = Lattice.from_arcs(
            [(0, 1, "a", -1.0), (0, 1, "b", -2.0), (1, 2, "c", -0.5)],
            start=0, end=2)
        out = word_to_plm_bpe(lat, IdentityTokenizer(CONV))
        assert out.num_nodes == lat.num_nodes
        assert [(a.src, a.dst, a.score) for a in out.arcs] == \
               [(a.src, a.dst, a.score) for a in lat.arcs]
        assert all(a.label == M + b.label for a, b in zip(out.arcs, lat.arcs))

    def test_empty_split_raises(self):
        lat = Lattice.from_arcs([(0, 1, "cat", -0.3)], start=0, end=1)

        class Broken(IdentityTokenizer):
            def split(self, word):
                return []

        with pytest.raises(TokenizerError):
            word_to_plm_bpe(lat, Broken(CONV))


class TestGreedyVocabTokenizer:
    def test_longest_match_first(self):
        tok = GreedyVocabTokenizer([M + "know", M + "k", "now", "n", "o", "w"], CONV)
        assert tok.split("known") == [M + "know", "n"]

    def test_round_trip(self):
        tok = GreedyVocabTokenizer([M + "ca", "t", M + "c", "at", "a"], CONV)
        for word in ["cat", "cata", "ca"]:
            assert join_pieces(tok.split(word), CONV) == word

    def test_unsplittable_raises(self):
        tok = GreedyVocabTokenizer([M + "a"], CONV)
        with pytest.raises(TokenizerError):
            tok.split("b")

    def test_from_file(self, tmp_path):
        vocab = tmp_path / "v.txt"
        vocab.write_text(f"{M}do\ng\n", encoding="utf-8")
        tok = GreedyVocabTokenizer.from_file(str(vocab), CONV)
        assert tok.split("dog") == [M + "do", "g"]


def resplit_vocab(words, rng):
    vocab = set()
    for w in words:
        vocab.add(M + w)
        if len(w) > 1:
            cut = int(rng.integers(1, len(w)))
            vocab.add(M + w[:cut])
            vocab.add(w[cut:])
    return sorted(vocab)


class TestRoundTripProperties:
    def test_word_sets_and_max_score_preserved(self):
        rng = np.random.default_rng(23)
        for _ in range(30):
            lat = random_bpe_lattice(rng, max_paths=300)
            words_in = word_seqs(lat)
            wlat = bpe_to_word(lat, CONV)
            assert validate_lattice(wlat).ok
            assert word_seqs(wlat, bpe=False) == words_in

            vocab = resplit_vocab({w for ws in words_in for w in ws}, rng)
            tok = GreedyVocabTokenizer(vocab, CONV)
            plat = word_to_plm_bpe(wlat, tok)
            assert validate_lattice(plat).ok
            assert word_seqs(plat) == words_in

            max_in = max(p.score for p in enumerate_paths(lat))
            max_w = max(p.score for p in enumerate_paths(wlat))
            max_p = max(p.score for p in enumerate_paths(plat))
            assert max_w == pytest.approx(max_in, abs=1e-9)
            assert max_p == pytest.approx(max_in, abs=1e-9)

    def test_word_to_plm_preserves_every_path_total(self):
        rng = np.random.default_rng(29)
        for _ in range(15):
            lat = random_bpe_lattice(rng, max_paths=200)
            wlat = bpe_to_word(lat, CONV)
            vocab = resplit_vocab(
                {w for ws in word_seqs(lat) for w in ws}, rng)
            plat = word_to_plm_bpe(wlat, GreedyVocabTokenizer(vocab, CONV))
            scores_w = sorted(p.score for p in enumerate_paths(wlat))
            scores_p = sorted(p.score for p in enumerate_paths(plat))
            assert scores_p == pytest.approx(scores_w, abs=1e-9)
