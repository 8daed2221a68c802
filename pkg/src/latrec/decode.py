"""Decoding with ASR/correction-model score interpolation.

Three modes share one combination rule: combined = (1-lambda) * asr score
+ lambda * correction score. Unconstrained mode searches the scorer's
whole vocabulary, N-best mode picks among the ASR hypotheses, and lattice
mode runs a per-node beam over a hypothesis lattice in topological order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Sequence

from .core import Lattice, NBestList, TERMINAL, Token, assemble_text, topo_order
from .errors import NoHypothesisError, ValidationError
from .metrics import WerStats, wer
from .retokenize import BoundaryConvention
from .scoring import (DEFAULT_PREFIX, DEFAULT_SEPARATOR, EncoderInput, Scorer,
                      build_encoder_input)
from .simulate import BeamConfig, EmissionModel, beam_search


def check_lambda(lam: float) -> float:
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"lambda must be in [0,1], got {lam}")
    return float(lam)


def interpolate(lam: float, asr: float, ec: float) -> float:
    """Combine the two scores; endpoints ignore the other side entirely so
    an infinite score there cannot poison the result."""
    if lam == 0.0:
        return asr
    if lam == 1.0:
        return ec
    return (1.0 - lam) * asr + lam * ec


@dataclass(frozen=True)
class DecodeResult:
    tokens: tuple[Token, ...]
    text: str
    ec_score: float
    asr_score: float
    combined: float
    mode: str


@dataclass(frozen=True)
class RescoredHyp:
    rank: int
    text: str
    asr_score: float
    ec_score: float
    combined: float


@dataclass
class _PartialHyp:
    history: tuple[Token, ...]
    score: float
    asr: float
    ec: float
    seq: int


class _NodeBeam:
    """Capacity-bounded hypothesis store for one lattice node.

    When full, a new hypothesis evicts the current minimum if its score is
    greater or equal; among equal minima the oldest entry goes first.
    """

    def __init__(self, capacity: int | None):
        self.capacity = capacity
        self.items: list[_PartialHyp] = []

    def put(self, hyp: _PartialHyp) -> None:
        if self.capacity is not None and len(self.items) >= self.capacity:
            low = min(self.items, key=lambda h: (h.score, h.seq))
            if low.score <= hyp.score:
                self.items.remove(low)
            else:
                return
        self.items.append(hyp)


class _ScorerEmission(EmissionModel):
    """Adapts a Scorer session to the emission-model interface so the plain
    beam search can drive unconstrained decoding."""

    def __init__(self, scorer: Scorer, session: Any, vocabulary: Iterable[Token]):
        self.vocabulary = frozenset(vocabulary)
        self._scorer = scorer
        self._session = session
        self._cands = sorted(self.vocabulary)

    def next_logprobs(self, history: tuple[Token, ...]) -> dict[Token, float]:
        lps = self._scorer.next_logprobs(self._session, history, self._cands)
        return {t: lp for t, lp in lps.items() if lp != float("-inf")}


def decode_unconstrained(scorer: Scorer, enc: EncoderInput, beam: int = 10,
                         max_len: int = 64,
                         vocabulary: Iterable[Token] | None = None,
                         conv: BoundaryConvention | None = None) -> DecodeResult:
    """Free beam search over the scorer's vocabulary (no ASR constraint)."""
    if beam < 1:
        raise ValidationError(f"beam must be >= 1, got {beam}")
    vocab = frozenset(vocabulary) if vocabulary is not None else scorer.vocabulary
    if not vocab:
        raise ValidationError("unconstrained decoding needs a vocabulary")
    conv = conv or BoundaryConvention()
    session = scorer.start(enc)
    try:
        model = _ScorerEmission(scorer, session, vocab)
        nbest = beam_search(model, BeamConfig(beam_width=beam, merge_context_k=None,
                                              max_len=max_len))
    finally:
        scorer.end(session)
    best = nbest.hyps[0]
    assert best.tokens is not None
    return DecodeResult(tokens=best.tokens,
                        text=assemble_text(best.tokens, conv.marker, conv.terminal),
                        ec_score=best.asr_score, asr_score=0.0,
                        combined=best.asr_score, mode="unconstrained")


def hyp_target_tokens(hyp, terminal: Token = TERMINAL) -> tuple[Token, ...]:
    """Token sequence a scorer should see for an N-best hypothesis: its own
    tokens when present, else its words plus the terminal."""
    if hyp.tokens is not None:
        return hyp.tokens
    return tuple(hyp.words()) + (terminal,)


def rescore_nbest(scorer: Scorer, enc: EncoderInput, nbest: NBestList, lam: float,
                  terminal: Token = TERMINAL) -> tuple[DecodeResult, list[RescoredHyp]]:
    """Pick the constraint-set hypothesis maximizing the combined score.

    Combined-score ties break on lexicographic token order, which keeps
    the choice independent of ASR ranking noise; at lambda 0 the result is
    the rank-1 hypothesis. The full per-hypothesis table is returned for
    reporting.
    """
    lam = check_lambda(lam)
    table: list[RescoredHyp] = []
    targets: list[tuple[Token, ...]] = []
    best_idx = 0
    for rank, hyp in enumerate(nbest.hyps, start=1):
        target = hyp_target_tokens(hyp, terminal)
        targets.append(target)
        ec = scorer.score_sequence(enc, target)
        combined = interpolate(lam, hyp.asr_score, ec)
        table.append(RescoredHyp(rank, hyp.text, hyp.asr_score, ec, combined))
        best = table[best_idx]
        if combined > best.combined or (combined == best.combined
                                        and target < targets[best_idx]):
            best_idx = rank - 1
    winner = nbest.hyps[best_idx]
    row = table[best_idx]
    return (DecodeResult(tokens=hyp_target_tokens(winner, terminal), text=winner.text,
                         ec_score=row.ec_score, asr_score=row.asr_score,
                         combined=row.combined, mode="nbest"),
            table)


def decode_lattice(scorer: Scorer, enc: EncoderInput, lat: Lattice, lam: float,
                   beam: int | None = 1,
                   conv: BoundaryConvention | None = None) -> DecodeResult:
    """Per-node beam search over the lattice in topological order.

    Each partial hypothesis at a node is extended along every out-arc; the
    arc adds (1-lambda) times its ASR score plus lambda times the scorer's
    log-probability of the arc label given the hypothesis history. A beam
    of None means unbounded.
    """
    lam = check_lambda(lam)
    if beam is not None and beam < 1:
        raise ValidationError(f"beam must be >= 1 or None, got {beam}")
    conv = conv or BoundaryConvention()
    order = topo_order(lat)
    beams: dict[int, _NodeBeam] = {v: _NodeBeam(beam) for v in order}
    seq = 0
    beams[lat.start].put(_PartialHyp(history=(), score=0.0, asr=0.0, ec=0.0, seq=seq))
    use_ec = lam > 0.0
    session = scorer.start(enc) if use_ec else None
    try:
        for v in order:
            if v == lat.end:
                continue
            arcs = lat.out_arcs(v)
            if not arcs:
                continue
            labels = sorted({a.label for a in arcs})
            for hyp in list(beams[v].items):
                if use_ec:
                    lps = scorer.next_logprobs(session, hyp.history, labels)
                else:
                    lps = {}
                for a in arcs:
                    lp = lps.get(a.label, 0.0)
                    if lam == 0.0:
                        step = a.score
                    elif lam == 1.0:
                        step = lp
                    else:
                        step = lam * lp + (1.0 - lam) * a.score
                    seq += 1
                    beams[a.dst].put(_PartialHyp(
                        history=hyp.history + (a.label,),
                        score=hyp.score + step,
                        asr=hyp.asr + a.score,
                        ec=hyp.ec + lp,
                        seq=seq))
    finally:
        if use_ec:
            scorer.end(session)
    finals = beams[lat.end].items
    if not finals:
        raise NoHypothesisError("no hypothesis reached the end node")
    best = sorted(finals, key=lambda h: (-h.score, h.history))[0]
    ec = best.ec
    if lam == 0.0:
        # The per-step scorer was skipped; fill in the report column with
        # one whole-sequence call.
        ec = scorer.score_sequence(enc, best.history)
    return DecodeResult(tokens=best.history,
                        text=assemble_text(best.history, conv.marker, conv.terminal),
                        ec_score=ec, asr_score=best.asr, combined=best.score,
                        mode="lattice")


# ---------------------------------------------------------------------------
# Interpolation weight sweep


@dataclass
class SweepUtt:
    utt_id: str
    ref_words: list[str]
    nbest: NBestList
    lattice: Lattice | None = None


@dataclass
class SweepRow:
    lam: float
    stats: WerStats


@dataclass
class SweepResult:
    rows: list[SweepRow]
    best_lam: float

    def table(self) -> list[tuple[float, float]]:
        return [(r.lam, r.stats.wer) for r in self.rows]


def lambda_grid(grid_step: float = 0.05) -> list[float]:
    if not 0.0 < grid_step <= 1.0:
        raise ValidationError(f"grid_step must be in (0,1], got {grid_step}")
    n = int(1.0 / grid_step + 1e-9)
    return [round(i * grid_step, 10) for i in range(n + 1)]


def sweep_lambda(mode: str, utts: Sequence[SweepUtt], scorer: Scorer,
                 grid_step: float = 0.05, n: int = 10,
                 prefix: str | None = None, separator: str | None = None,
                 beam: int | None = None,
                 conv: BoundaryConvention | None = None) -> SweepResult:
    """Corpus WER at every interpolation weight on the grid.

    The best row is the lowest WER; ties resolve to the smaller weight.
    """
    if mode not in ("nbest", "lattice"):
        raise ValidationError(f"sweep mode must be nbest or lattice, got {mode!r}")
    if not utts:
        raise ValidationError("sweep needs at least one utterance")
    prefix = DEFAULT_PREFIX if prefix is None else prefix
    separator = DEFAULT_SEPARATOR if separator is None else separator
    conv = conv or BoundaryConvention()
    encs = {u.utt_id: build_encoder_input(u.nbest, n, prefix, separator) for u in utts}
    rows: list[SweepRow] = []
    for lam in lambda_grid(grid_step):
        pooled: list[tuple[str, WerStats]] = []
        for u in utts:
            enc = encs[u.utt_id]
            if mode == "nbest":
                result, _ = rescore_nbest(scorer, enc, u.nbest.top(n), lam)
            else:
                if u.lattice is None:
                    raise ValidationError(f"utterance {u.utt_id} has no lattice")
                result = decode_lattice(scorer, enc, u.lattice, lam, beam, conv)
            pooled.append((u.utt_id, wer(u.ref_words, result.text.split())))
        rows.append(SweepRow(lam, WerStats(
            subs=sum(s.subs for _, s in pooled),
            ins=sum(s.ins for _, s in pooled),
            dels=sum(s.dels for _, s in pooled),
            ref_len=sum(s.ref_len for _, s in pooled))))
    best = rows[0]
    for row in rows[1:]:
        if row.stats.wer < best.stats.wer:
            best = row
    return SweepResult(rows=rows, best_lam=best.lam)
