"""Lattice conversion between token spaces.

A sub-word lattice whose word-initial tokens carry a boundary marker is
converted to a word lattice by collapsing boundary-to-boundary token runs;
a word lattice is converted into another sub-word space by splitting each
word arc with a pluggable tokenizer. Both conversions preserve the word
sequences and the maximum path score.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .core import Arc, Lattice, Token, starts_word
from .errors import SegmentationError, TokenizerError, ValidationError

DEFAULT_MARKER = "▁"  # the SentencePiece-style lower one eighth block
DEFAULT_TERMINAL = "</s>"


@dataclass(frozen=True)
class BoundaryConvention:
    """How word-initial tokens are marked and which token ends a sentence."""

    marker: str = DEFAULT_MARKER
    terminal: str = DEFAULT_TERMINAL

    def __post_init__(self) -> None:
        if not self.marker:
            raise ValidationError("boundary marker must be non-empty")

    def is_boundary(self, token: Token) -> bool:
        return starts_word(token, self.marker)

    def strip(self, token: Token) -> str:
        return token[len(self.marker):]


class WordTokenizer(ABC):
    """Splits one plain word into sub-tokens obeying a BoundaryConvention:
    the first piece carries the marker, the remaining pieces do not, and
    rejoining the pieces restores the word."""

    convention: BoundaryConvention

    @abstractmethod
    def split(self, word: str) -> list[Token]:
        ...


class IdentityTokenizer(WordTokenizer):
    def __init__(self, convention: BoundaryConvention | None = None):
        self.convention = convention or BoundaryConvention()

    def split(self, word: str) -> list[Token]:
        return [self.convention.marker + word]


class GreedyVocabTokenizer(WordTokenizer):
    """Longest-match-first splitting against a fixed token vocabulary.

    Word-initial positions match marker-carrying vocabulary entries, later
    positions match bare entries. Raises TokenizerError when no entry
    matches at some position.
    """

    def __init__(self, vocab: Sequence[Token], convention: BoundaryConvention | None = None):
        self.convention = convention or BoundaryConvention()
        marker = self.convention.marker
        self._initial = sorted((t for t in vocab if t.startswith(marker)), key=len, reverse=True)
        self._inner = sorted((t for t in vocab if not t.startswith(marker)), key=len, reverse=True)
        if not self._initial:
            raise ValidationError("vocabulary has no word-initial tokens")

    @classmethod
    def from_file(cls, path: str, convention: BoundaryConvention | None = None
                  ) -> "GreedyVocabTokenizer":
        with open(path, "r", encoding="utf-8") as fh:
            vocab = [line.rstrip("\n") for line in fh if line.strip() and not line.startswith("#")]
        return cls(vocab, convention)

    def split(self, word: str) -> list[Token]:
        target = self.convention.marker + word
        pieces: list[Token] = []
        pos = 0
        table = self._initial
        while pos < len(target):
            for cand in table:
                if target.startswith(cand, pos):
                    pieces.append(cand)
                    pos += len(cand)
                    break
            else:
                raise TokenizerError(
                    f"no vocabulary token matches {target[pos:]!r} while splitting {word!r}")
            table = self._inner
        return pieces


def join_pieces(pieces: Sequence[Token], conv: BoundaryConvention) -> str:
    """Reassemble one word from tokenizer pieces; inverse of split()."""
    if not pieces:
        raise TokenizerError("empty piece sequence")
    if not conv.is_boundary(pieces[0]):
        raise SegmentationError(f"first piece {pieces[0]!r} lacks the boundary marker")
    return conv.strip(pieces[0]) + "".join(pieces[1:])


def path_words(tokens: Sequence[Token], conv: BoundaryConvention | None = None) -> list[str]:
    """Assemble a token sequence into words; the terminal token is dropped.

    Raises SegmentationError when the sequence does not start on a word
    boundary.
    """
    conv = conv or BoundaryConvention()
    words: list[str] = []
    for tok in tokens:
        if tok == conv.terminal:
            continue
        if conv.is_boundary(tok):
            words.append(conv.strip(tok))
        elif words:
            words[-1] += tok
        else:
            raise SegmentationError(f"token {tok!r} does not start a word")
    return words


class WordRun(NamedTuple):
    """A maximal boundary-to-boundary token run on some path.

    ``word`` is None for a terminal arc, which passes through conversion
    unchanged.
    """

    src: int
    dst: int
    word: str | None
    score: float
    arcs: tuple[Arc, ...]


def word_runs(lat: Lattice, conv: BoundaryConvention | None = None) -> list[WordRun]:
    """Enumerate every word run reachable on boundary-aligned paths.

    Requires every path to segment into whole words: an arc that continues
    a word out of a node where some path ends a word is reported as a
    SegmentationError naming that node.
    """
    conv = conv or BoundaryConvention()
    runs: list[WordRun] = []
    seen = {lat.start}
    work = [lat.start]
    while work:
        v = work.pop()
        for arc in lat.out_arcs(v):
            if arc.label == conv.terminal:
                runs.append(WordRun(v, arc.dst, None, arc.score, (arc,)))
                if arc.dst not in seen:
                    seen.add(arc.dst)
                    work.append(arc.dst)
                continue
            if not conv.is_boundary(arc.label):
                raise SegmentationError(
                    f"path with a non-word-initial first token at node {v}")
            stack = [(arc.dst, conv.strip(arc.label), arc.score, (arc,))]
            while stack:
                node, text, score, arcs = stack.pop()
                ends_here = node == lat.end or any(
                    conv.is_boundary(a.label) or a.label == conv.terminal
                    for a in lat.out_arcs(node))
                if ends_here:
                    runs.append(WordRun(v, node, text, score, arcs))
                    if node not in seen:
                        seen.add(node)
                        work.append(node)
                for a in lat.out_arcs(node):
                    if a.label == conv.terminal or conv.is_boundary(a.label):
                        continue
                    stack.append((a.dst, text + a.label, score + a.score, arcs + (a,)))
    return runs


def _renumber(node_ids: set[int]) -> dict[int, int]:
    return {old: new for new, old in enumerate(sorted(node_ids))}


def bpe_to_word(lat: Lattice, conv: BoundaryConvention | None = None) -> Lattice:
    """Collapse sub-token runs into word arcs.

    A word arc's score is the sum of its constituent arc scores; duplicate
    (src, dst, word) arcs keep the maximum score. Terminal arcs survive
    unchanged.
    """
    conv = conv or BoundaryConvention()
    runs = word_runs(lat, conv)
    best: dict[tuple[int, int, str], float] = {}
    for run in runs:
        label = conv.terminal if run.word is None else run.word
        key = (run.src, run.dst, label)
        if key not in best or run.score > best[key]:
            best[key] = run.score
    nodes = {lat.start, lat.end}
    for src, dst, _ in best:
        nodes.add(src)
        nodes.add(dst)
    remap = _renumber(nodes)
    arcs = [Arc(remap[s], remap[d], label, score) for (s, d, label), score in best.items()]
    return Lattice.from_arcs(arcs, start=remap[lat.start], end=remap[lat.end],
                             num_nodes=len(remap))


def word_to_plm_bpe(lat: Lattice, tok: WordTokenizer) -> Lattice:
    """Split each word arc into a fresh sub-token chain.

    The word's whole score is placed on the first piece; the remaining
    pieces score 0.0, so every path total is preserved exactly. Terminal
    arcs pass through unchanged.
    """
    conv = tok.convention
    arcs: list[Arc] = []
    next_node = lat.num_nodes
    for a in lat.arcs:  # canonical order keeps fresh node ids deterministic
        if a.label == conv.terminal:
            arcs.append(a)
            continue
        pieces = tok.split(a.label)
        if not pieces:
            raise TokenizerError(f"tokenizer returned no pieces for {a.label!r}")
        if join_pieces(pieces, conv) != a.label:
            raise TokenizerError(
                f"pieces {pieces!r} do not reassemble to {a.label!r}")
        src = a.src
        for i, piece in enumerate(pieces):
            last = i == len(pieces) - 1
            dst = a.dst if last else next_node
            if not last:
                next_node += 1
            arcs.append(Arc(src, dst, piece, a.score if i == 0 else 0.0))
            src = dst
    return Lattice.from_arcs(arcs, start=lat.start, end=lat.end, num_nodes=next_node)
