"""Desk-scale ASR output simulation.

Token-synchronous beam search over a pluggable emission model, optionally
with k-gram context merging: partial hypotheses whose last k-1 tokens
agree at the same step are merged, the best-scoring one keeps the beam
slot, and the loser's incoming arc is recorded in a lattice. The toy
emission models produce boundary-marked sub-word tokens so the downstream
word assembly, retokenization, and WER machinery all apply.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (Arc, Hypothesis, Lattice, NBestList, TERMINAL, Token,
                   assemble_text)
from .errors import NoHypothesisError, ValidationError
from .retokenize import DEFAULT_MARKER


class EmissionModel(ABC):
    """Per-step next-token distribution conditioned on the token history.

    ``next_logprobs`` returns the support of the distribution only; absent
    tokens have probability zero. Probabilities must sum to one.
    """

    vocabulary: frozenset[Token]

    @abstractmethod
    def next_logprobs(self, history: tuple[Token, ...]) -> dict[Token, float]:
        ...


@dataclass(frozen=True)
class BeamConfig:
    beam_width: int = 10
    merge_context_k: int | None = 4
    max_len: int = 32
    merge_across_steps: bool = False

    def __post_init__(self) -> None:
        if self.beam_width < 1:
            raise ValidationError(f"beam_width must be >= 1, got {self.beam_width}")
        if self.merge_context_k is not None and self.merge_context_k < 2:
            raise ValidationError(
                f"merge_context_k must be >= 2, got {self.merge_context_k}")
        if self.max_len < 1:
            raise ValidationError(f"max_len must be >= 1, got {self.max_len}")


@dataclass(frozen=True)
class MergeState:
    """Identity of a mergeable partial hypothesis: step count and the last
    k-1 emitted tokens."""

    step: int
    context: tuple[Token, ...]


@dataclass
class _BeamEntry:
    history: tuple[Token, ...]
    score: float
    node: int  # lattice node, -1 when no lattice is being built


@dataclass
class _LatticeBuilder:
    """Accumulates arcs during a merged search, then trims dead branches."""

    arcs: dict[tuple[int, int, Token], float] = field(default_factory=dict)
    next_id: int = 0

    def new_node(self) -> int:
        node = self.next_id
        self.next_id += 1
        return node

    def add_arc(self, src: int, dst: int, label: Token, score: float) -> None:
        key = (src, dst, label)
        old = self.arcs.get(key)
        if old is None or score > old:
            self.arcs[key] = score

    def build(self, start: int, end: int) -> Lattice:
        fwd: dict[int, list[int]] = {}
        bwd: dict[int, list[int]] = {}
        for src, dst, _ in self.arcs:
            fwd.setdefault(src, []).append(dst)
            bwd.setdefault(dst, []).append(src)
        keep = _closure(start, fwd) & _closure(end, bwd)
        remap = {old: new for new, old in enumerate(sorted(keep))}
        arcs = [Arc(remap[s], remap[d], lab, sc)
                for (s, d, lab), sc in self.arcs.items()
                if s in keep and d in keep]
        return Lattice.from_arcs(arcs, start=remap[start], end=remap[end],
                                 num_nodes=len(remap))


def _closure(origin: int, adj: dict[int, list[int]]) -> set[int]:
    seen = {origin}
    work = [origin]
    while work:
        v = work.pop()
        for nxt in adj.get(v, ()):
            if nxt not in seen:
                seen.add(nxt)
                work.append(nxt)
    return seen


def _run_search(model: EmissionModel, cfg: BeamConfig, utt_id: str,
                build_lattice: bool):
    marker = getattr(model, "marker", DEFAULT_MARKER)
    builder = _LatticeBuilder() if build_lattice else None
    start_node = builder.new_node() if builder else -1
    end_node = builder.new_node() if builder else -1
    k = cfg.merge_context_k

    beam = [_BeamEntry(history=(), score=0.0, node=start_node)]
    completed: list[tuple[float, tuple[Token, ...]]] = []
    node_by_key: dict[object, int] = {}

    for step in range(1, cfg.max_len + 1):
        if not beam:
            break
        # (parent index, token, emission logprob, new score)
        expansions: list[tuple[int, Token, float, float]] = []
        for idx, entry in enumerate(beam):
            dist = model.next_logprobs(entry.history)
            for tok in sorted(dist):
                lp = dist[tok]
                if tok == TERMINAL:
                    completed.append((entry.score + lp, entry.history + (tok,)))
                    if builder:
                        builder.add_arc(entry.node, end_node, tok, lp)
                else:
                    expansions.append((idx, tok, lp, entry.score + lp))

        if k is not None:
            # Merge expansions that share the (k-1)-token context; the best
            # one survives, the rest only leave their incoming arc behind.
            groups: dict[object, list[tuple[int, Token, float, float]]] = {}
            for exp in expansions:
                idx, tok, lp, score = exp
                history = beam[idx].history + (tok,)
                context = history[-(k - 1):]
                key = context if cfg.merge_across_steps else MergeState(step, context)
                groups.setdefault(key, []).append(exp)
            survivors: list[tuple[int, Token, float, float, object]] = []
            for key, members in groups.items():
                members.sort(key=lambda e: (-e[3], beam[e[0]].history + (e[1],)))
                winner = members[0]
                survivors.append((*winner, key))
            survivors.sort(key=lambda e: (-e[3], beam[e[0]].history + (e[1],)))
            new_beam: list[_BeamEntry] = []
            for idx, tok, lp, score, key in survivors[:cfg.beam_width]:
                node = -1
                if builder:
                    node = node_by_key.get(key, -1)
                    if node < 0:
                        node = builder.new_node()
                        node_by_key[key] = node
                    for m_idx, m_tok, m_lp, _ in groups[key]:
                        builder.add_arc(beam[m_idx].node, node, m_tok, m_lp)
                new_beam.append(_BeamEntry(beam[idx].history + (tok,), score, node))
            beam = new_beam
        else:
            expansions.sort(key=lambda e: (-e[3], beam[e[0]].history + (e[1],)))
            new_beam = []
            for idx, tok, lp, score in expansions[:cfg.beam_width]:
                node = -1
                if builder:
                    node = builder.new_node()
                    builder.add_arc(beam[idx].node, node, tok, lp)
                new_beam.append(_BeamEntry(beam[idx].history + (tok,), score, node))
            beam = new_beam

    if not completed:
        raise NoHypothesisError(
            f"no hypothesis completed within max_len={cfg.max_len}")
    completed.sort(key=lambda c: (-c[0], c[1]))
    hyps = tuple(
        Hypothesis(text=assemble_text(tokens, marker), asr_score=score, tokens=tokens)
        for score, tokens in completed[:cfg.beam_width])
    nbest = NBestList(utt_id, hyps)
    lattice = builder.build(start_node, end_node) if builder else None
    return nbest, lattice


def beam_search(model: EmissionModel, cfg: BeamConfig, utt_id: str = "utt") -> NBestList:
    """Plain beam search; completed hypotheses end on the terminal token."""
    plain = BeamConfig(beam_width=cfg.beam_width, merge_context_k=None,
                       max_len=cfg.max_len)
    nbest, _ = _run_search(model, plain, utt_id, build_lattice=False)
    return nbest


def merged_beam_search(model: EmissionModel, cfg: BeamConfig,
                       utt_id: str = "utt") -> tuple[NBestList, Lattice]:
    """Beam search with k-gram context merging; also returns the lattice of
    everything the beam explored to completion."""
    if cfg.merge_context_k is None:
        raise ValidationError("merged_beam_search requires merge_context_k")
    return _run_search(model, cfg, utt_id, build_lattice=True)


# ---------------------------------------------------------------------------
# Toy emission models


class TableModel(EmissionModel):
    """Distributions read from an explicit {history-key: {token: prob}} table.

    ``key_fn`` reduces a history to a table key; by default the previous
    token (bigram behavior).
    """

    def __init__(self, table: dict, vocabulary: Sequence[Token], key_fn=None,
                 marker: str = DEFAULT_MARKER):
        self.vocabulary = frozenset(vocabulary) | {TERMINAL}
        self.marker = marker
        self._key_fn = key_fn or (lambda h: h[-1] if h else None)
        self._table = {
            key: {tok: math.log(p) for tok, p in dist.items() if p > 0.0}
            for key, dist in table.items()
        }
        for key, dist in table.items():
            total = sum(dist.values())
            if abs(total - 1.0) > 1e-9:
                raise ValidationError(f"distribution for {key!r} sums to {total}")

    def next_logprobs(self, history: tuple[Token, ...]) -> dict[Token, float]:
        return dict(self._table[self._key_fn(history)])


class UniformModel(EmissionModel):
    def __init__(self, vocabulary: Sequence[Token], marker: str = DEFAULT_MARKER):
        self.vocabulary = frozenset(vocabulary) | {TERMINAL}
        self.marker = marker
        self._logp = -math.log(len(self.vocabulary))

    def next_logprobs(self, history: tuple[Token, ...]) -> dict[Token, float]:
        return {tok: self._logp for tok in sorted(self.vocabulary)}


class NoisyChannelModel(EmissionModel):
    """Position-keyed channel around a reference token sequence.

    At each position the channel peak is the reference token with
    probability 1-rho, otherwise one of its confusables; the peak carries
    1-spread of the mass and the remaining alternatives share the rest.
    The terminal is emitted with probability one after the last reference
    token, so all hypotheses have equal length.
    """

    def __init__(self, reference: Sequence[Token], rho: float,
                 confusables: dict[Token, tuple[Token, ...]],
                 rng: np.random.Generator, spread: float = 0.3,
                 marker: str = DEFAULT_MARKER):
        if not 0.0 <= rho <= 1.0:
            raise ValidationError(f"rho must be in [0,1], got {rho}")
        if not 0.0 < spread < 1.0:
            raise ValidationError(f"spread must be in (0,1), got {spread}")
        self.reference = tuple(reference)
        self.marker = marker
        vocab = set(self.reference)
        self._dists: list[dict[Token, float]] = []
        for tok in self.reference:
            alts = confusables.get(tok, ())
            vocab.update(alts)
            if not alts:
                self._dists.append({tok: 0.0})
                continue
            corrupt = rho > 0.0 and rng.random() < rho
            peak = alts[rng.integers(len(alts))] if corrupt else tok
            rest = [t for t in (tok, *alts) if t != peak]
            dist = {peak: math.log(1.0 - spread)}
            share = spread / len(rest)
            for t in rest:
                dist[t] = math.log(share)
            self._dists.append(dist)
        self.vocabulary = frozenset(vocab) | {TERMINAL}

    def next_logprobs(self, history: tuple[Token, ...]) -> dict[Token, float]:
        step = len(history)
        if step >= len(self.reference):
            return {TERMINAL: 0.0}
        return dict(self._dists[step])


@dataclass
class ToyModels:
    """Deterministic-from-seed catalogue of toy emission models."""

    seed: int

    def _rng(self, tag: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, tag])

    def bigram(self, vocab: Sequence[Token] = ("a", "b", "c")) -> TableModel:
        """Random bigram table over a small vocabulary plus the terminal."""
        rng = self._rng(1)
        tokens = list(vocab)
        full = tokens + [TERMINAL]
        table: dict = {}
        for key in [None, *tokens]:
            weights = rng.random(len(full)) + 0.05
            if key is None:
                weights[-1] = 0.0  # do not end before emitting anything
            probs = weights / weights.sum()
            table[key] = {tok: float(p) for tok, p in zip(full, probs) if p > 0.0}
        return TableModel(table, full)

    def uniform(self, vocab: Sequence[Token] = ("a", "b")) -> UniformModel:
        return UniformModel(vocab)

    def noisy_channel(self, reference: Sequence[Token], rho: float,
                      confusables: dict[Token, tuple[Token, ...]] | None = None,
                      spread: float = 0.3, salt: int = 0) -> NoisyChannelModel:
        if confusables is None:
            confusables = synth_confusables(tuple(dict.fromkeys(reference)),
                                            self._rng(2))
        return NoisyChannelModel(reference, rho, confusables,
                                 self._rng(1000 + salt), spread=spread)


def make_toy_models(seed: int) -> ToyModels:
    return ToyModels(seed)


def synth_confusables(tokens: Sequence[Token], rng: np.random.Generator,
                      per_token: int = 2, marker: str = DEFAULT_MARKER
                      ) -> dict[Token, tuple[Token, ...]]:
    """Invent boundary-class-preserving confusable tokens.

    Word-initial tokens confuse with word-initial variants and continuation
    tokens with continuations, so channel hypotheses keep the reference's
    word segmentation.
    """
    consonants = "bcdfghjklmnpqrstvwz"
    out: dict[Token, tuple[Token, ...]] = {}
    for tok in tokens:
        if tok == TERMINAL:
            continue
        stem = tok[len(marker):] if tok.startswith(marker) else tok
        prefix = marker if tok.startswith(marker) else ""
        alts: list[Token] = []
        attempts = 0
        while len(alts) < per_token and attempts < 50:
            attempts += 1
            letter = consonants[rng.integers(len(consonants))]
            cand = prefix + letter + stem[1:] if stem else prefix + letter
            if cand != tok and cand not in alts:
                alts.append(cand)
        out[tok] = tuple(alts)
    return out


# ---------------------------------------------------------------------------
# Corpus generation

_LEXICON_STEMS = [
    "cat", "dog", "house", "river", "stone", "light", "cloud", "paper",
    "train", "glass", "north", "field", "music", "window", "bridge",
    "garden", "silver", "market", "candle", "forest", "meadow", "harbor",
    "autumn", "pencil", "butter", "copper", "dancer", "engine", "fabric",
    "gentle",
]


def make_lexicon(rng: np.random.Generator, marker: str = DEFAULT_MARKER
                 ) -> dict[str, tuple[Token, ...]]:
    """Word -> sub-token decomposition; roughly half the words split in two."""
    lexicon: dict[str, tuple[Token, ...]] = {}
    for stem in _LEXICON_STEMS:
        if len(stem) > 4 and rng.random() < 0.5:
            cut = int(rng.integers(2, len(stem) - 1))
            lexicon[stem] = (marker + stem[:cut], stem[cut:])
        else:
            lexicon[stem] = (marker + stem,)
    return lexicon


@dataclass
class SimUtterance:
    utt_id: str
    ref_words: list[str]
    nbest: NBestList
    lattice: Lattice


@dataclass
class SimCorpus:
    """A simulated corpus plus the channel vocabulary that produced it."""

    utterances: list[SimUtterance]
    lexicon: dict[str, tuple[Token, ...]]
    confusables: dict[Token, tuple[Token, ...]]
    marker: str

    def __iter__(self):
        return iter(self.utterances)

    def __len__(self) -> int:
        return len(self.utterances)

    def ref_tokens(self, utt: SimUtterance) -> list[Token]:
        return [t for w in utt.ref_words for t in self.lexicon[w]]

    def truth_scorer(self, n: int = 10, prefix: str | None = None,
                     separator: str | None = None, spread: float = 0.2):
        """A correction scorer that knows each utterance's reference.

        Returns an EmissionModelScorer keyed by encoder-input text built
        with the same (n, prefix, separator); it peaks on the reference
        token at every position, leaving ``spread`` mass to confusables.
        Such a scorer is strictly better informed than any noisy channel
        the recognizer decoded.
        """
        from .scoring import (DEFAULT_PREFIX, DEFAULT_SEPARATOR,
                              EmissionModelScorer, build_encoder_input)

        prefix = DEFAULT_PREFIX if prefix is None else prefix
        separator = DEFAULT_SEPARATOR if separator is None else separator
        rng = np.random.default_rng(0)  # unused at rho=0, required by signature
        models = {}
        for utt in self.utterances:
            enc = build_encoder_input(utt.nbest, n, prefix, separator)
            models[enc.text] = NoisyChannelModel(
                self.ref_tokens(utt), 0.0, self.confusables, rng,
                spread=spread, marker=self.marker)
        return EmissionModelScorer(lambda enc: models[enc.text])


def simulate_corpus(seed: int, utts: int, beam_width: int = 10, k: int = 4,
                    rho: float = 0.3, spread: float = 0.3,
                    min_words: int = 6, max_words: int = 12,
                    marker: str = DEFAULT_MARKER) -> SimCorpus:
    """Generate references and run merged beam search per utterance."""
    if utts < 1:
        raise ValidationError(f"utts must be >= 1, got {utts}")
    rng = np.random.default_rng([seed, 77])
    lexicon = make_lexicon(rng, marker)
    all_tokens = sorted({t for pieces in lexicon.values() for t in pieces})
    confusables = synth_confusables(all_tokens, rng, marker=marker)
    words = sorted(lexicon)
    out: list[SimUtterance] = []
    for i in range(utts):
        n_words = int(rng.integers(min_words, max_words + 1))
        ref_words = [words[int(rng.integers(len(words)))] for _ in range(n_words)]
        ref_tokens = [t for w in ref_words for t in lexicon[w]]
        model = NoisyChannelModel(ref_tokens, rho, confusables, rng,
                                  spread=spread, marker=marker)
        cfg = BeamConfig(beam_width=beam_width, merge_context_k=k,
                         max_len=len(ref_tokens) + 1)
        utt_id = f"utt{i:04d}"
        nbest, lattice = merged_beam_search(model, cfg, utt_id)
        out.append(SimUtterance(utt_id, ref_words, nbest, lattice))
    return SimCorpus(out, lexicon, confusables, marker)
