"""Correction-model abstraction: encoder inputs and incremental scorers.

A Scorer exposes next-token log-probabilities conditioned on an encoder
input built from the ASR N-best list. The bundled NgramScorer is a small
deterministic stand-in for a neural correction model; real models attach
through the external wire protocol (see latrec.external).
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Sequence

from .core import NBestList, TERMINAL, Token
from .errors import ValidationError

DEFAULT_PREFIX = "text correction:"
DEFAULT_SEPARATOR = "</s>"

NEG_INF = float("-inf")


@dataclass(frozen=True)
class EncoderInput:
    """Concatenated N-best encoder text: prefix, then each hypothesis
    followed by the separator, single-space joined."""

    text: str
    n_used: int
    prefix: str
    separator: str


def build_encoder_input(nbest: NBestList, n: int,
                        prefix: str = DEFAULT_PREFIX,
                        separator: str = DEFAULT_SEPARATOR) -> EncoderInput:
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    n_used = min(n, len(nbest.hyps))
    parts = [prefix] if prefix else []
    for hyp in nbest.hyps[:n_used]:
        parts.append(f"{hyp.text} {separator}")
    return EncoderInput(text=" ".join(parts), n_used=n_used,
                        prefix=prefix, separator=separator)


class Scorer(ABC):
    """Incremental sequence scorer over an encoder input.

    ``score_sequence`` must equal the sum of singleton ``next_logprobs``
    queries along the target; the default implementation guarantees it.
    """

    @abstractmethod
    def start(self, enc: EncoderInput) -> Any:
        """Open a scoring session for one encoder input."""

    @abstractmethod
    def next_logprobs(self, session: Any, history: Sequence[Token],
                      candidates: Iterable[Token]) -> dict[Token, float]:
        """Log-probabilities of each candidate as the next token."""

    def end(self, session: Any) -> None:
        """Release a session; default is a no-op."""

    def score_sequence(self, enc: EncoderInput, target: Sequence[Token]) -> float:
        session = self.start(enc)
        try:
            total = 0.0
            for i, tok in enumerate(target):
                total += self.next_logprobs(session, target[:i], (tok,))[tok]
            return total
        finally:
            self.end(session)

    @property
    def vocabulary(self) -> frozenset[Token] | None:
        """Full candidate set when the scorer knows one, else None."""
        return None


class NgramScorer(Scorer):
    """Add-alpha smoothed n-gram model fit on plain text.

    Conditioning backs off from the longest seen context down to a uniform
    floor over the vocabulary; candidates outside the vocabulary score
    -inf. The encoder input is ignored, which is a documented limitation
    of this reference scorer.
    """

    def __init__(self, order: int, alpha: float = 1.0, terminal: Token = TERMINAL):
        if order < 2:
            raise ValidationError(f"order must be >= 2, got {order}")
        if alpha <= 0:
            raise ValidationError(f"alpha must be > 0, got {alpha}")
        self.order = order
        self.alpha = alpha
        self.terminal = terminal
        self._counts: dict[tuple[Token, ...], Counter] = {}
        self._totals: dict[tuple[Token, ...], int] = {}
        self._vocab: set[Token] = {terminal}
        self._fitted = False
        # Distributions depend only on the backed-off context, so they are
        # built once per context and shared across histories.
        self._dist_cache: dict[tuple[Token, ...] | None, dict[Token, float]] = {}

    def fit(self, sentences: Iterable[Sequence[Token]]) -> "NgramScorer":
        count = 0
        for sent in sentences:
            seq = tuple(sent) + (self.terminal,)
            count += 1
            self._vocab.update(seq)
            for i, tok in enumerate(seq):
                for length in range(1, self.order):
                    if i - length < 0:
                        break
                    ctx = seq[i - length:i]
                    self._counts.setdefault(ctx, Counter())[tok] += 1
                    self._totals[ctx] = self._totals.get(ctx, 0) + 1
        if count == 0:
            raise ValidationError("training corpus is empty")
        self._fitted = True
        self._dist_cache = {}
        return self

    @classmethod
    def from_text(cls, lines: Iterable[str], order: int, alpha: float = 1.0,
                  terminal: Token = TERMINAL) -> "NgramScorer":
        return cls(order, alpha, terminal).fit(
            [line.split() for line in lines if line.strip()])

    @classmethod
    def from_text_file(cls, path: str, order: int, alpha: float = 1.0,
                       terminal: Token = TERMINAL) -> "NgramScorer":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh, order, alpha, terminal)

    @property
    def vocabulary(self) -> frozenset[Token]:
        return frozenset(self._vocab)

    def distribution(self, history: Sequence[Token]) -> dict[Token, float]:
        """Full conditional distribution over the vocabulary.

        The returned dict is shared with the internal cache; treat it as
        read-only.
        """
        if not self._fitted:
            raise ValidationError("scorer has not been fit")
        history = tuple(history)
        context: tuple[Token, ...] | None = None
        for length in range(min(self.order - 1, len(history)), 0, -1):
            ctx = history[len(history) - length:]
            if self._totals.get(ctx):
                context = ctx
                break
        cached = self._dist_cache.get(context)
        if cached is not None:
            return cached
        vocab_size = len(self._vocab)
        if context is None:
            uniform = -math.log(vocab_size)
            dist = {tok: uniform for tok in self._vocab}
        else:
            counts = self._counts[context]
            denom = self._totals[context] + self.alpha * vocab_size
            dist = {tok: math.log((counts.get(tok, 0) + self.alpha) / denom)
                    for tok in self._vocab}
        self._dist_cache[context] = dist
        return dist

    def start(self, enc: EncoderInput) -> Any:
        return None

    def next_logprobs(self, session: Any, history: Sequence[Token],
                      candidates: Iterable[Token]) -> dict[Token, float]:
        dist = self.distribution(history)
        return {c: dist.get(c, NEG_INF) for c in candidates}


class EmissionModelScorer(Scorer):
    """Scorer backed by per-utterance emission models.

    ``model_for`` maps an encoder input to an object with a
    ``next_logprobs(history) -> {token: logprob}`` method (any emission
    model from latrec.simulate qualifies). Used to plug channel-truth
    models into the decoders in experiments and tests.
    """

    def __init__(self, model_for: Callable[[EncoderInput], Any]):
        self._model_for = model_for

    def start(self, enc: EncoderInput) -> Any:
        return self._model_for(enc)

    def next_logprobs(self, session: Any, history: Sequence[Token],
                      candidates: Iterable[Token]) -> dict[Token, float]:
        dist = session.next_logprobs(tuple(history))
        return {c: dist.get(c, NEG_INF) for c in candidates}


def run_scorer_conformance(scorer: Scorer, enc: EncoderInput,
                           targets: Sequence[Sequence[Token]],
                           tol: float = 1e-6,
                           words: Sequence[str] = (),
                           convention=None) -> list[str]:
    """Contract checks every scorer must pass; returns failure strings.

    Verifies score_sequence against summed singleton next_logprobs queries
    and, when the scorer exposes ``tokenize``, that word splits rejoin to
    the original word.
    """
    from .retokenize import BoundaryConvention, join_pieces

    failures: list[str] = []
    for target in targets:
        whole = scorer.score_sequence(enc, target)
        session = scorer.start(enc)
        try:
            summed = 0.0
            for i, tok in enumerate(target):
                summed += scorer.next_logprobs(session, target[:i], (tok,))[tok]
        finally:
            scorer.end(session)
        if not (math.isfinite(whole) and math.isfinite(summed)):
            if whole != summed:  # both -inf is consistent
                failures.append(f"non-finite mismatch for {target!r}: {whole} vs {summed}")
        elif abs(whole - summed) > tol:
            failures.append(
                f"score_sequence {whole} != summed next_logprobs {summed} for {target!r}")
    tokenize = getattr(scorer, "tokenize", None)
    if tokenize is not None and words:
        conv = convention or BoundaryConvention()
        for word in words:
            pieces = tokenize(word)
            if not pieces:
                failures.append(f"tokenize({word!r}) returned no pieces")
                continue
            try:
                rejoined = join_pieces(pieces, conv)
            except Exception as e:  # noqa: BLE001 - report, do not crash
                failures.append(f"tokenize({word!r}) -> {pieces!r} does not rejoin: {e}")
                continue
            if rejoined != word:
                failures.append(f"tokenize({word!r}) -> {pieces!r} rejoins to {rejoined!r}")
    return failures
