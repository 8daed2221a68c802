"""Word error rate, Levenshtein alignment, and oracle WER.

Corpus WER pools edit counts over pooled reference lengths; it is not the
mean of per-utterance rates. WER is computed on case-sensitive,
whitespace-separated words with no text normalization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .core import Lattice, LatticePath, topo_order
from .errors import EmptyReferenceError
from .retokenize import BoundaryConvention, path_words, word_runs


@dataclass(frozen=True)
class EditOp:
    """One alignment step; indices are 0-based into ref/hyp, -1 when absent."""

    kind: str  # match | substitute | insert | delete
    ref_idx: int
    hyp_idx: int


@dataclass(frozen=True)
class Alignment:
    ops: tuple[EditOp, ...]

    def counts(self) -> tuple[int, int, int]:
        subs = sum(1 for op in self.ops if op.kind == "substitute")
        ins = sum(1 for op in self.ops if op.kind == "insert")
        dels = sum(1 for op in self.ops if op.kind == "delete")
        return subs, ins, dels


@dataclass(frozen=True)
class WerStats:
    subs: int
    ins: int
    dels: int
    ref_len: int

    def __post_init__(self) -> None:
        if self.ref_len < 1:
            raise EmptyReferenceError("reference length must be >= 1")

    @property
    def edits(self) -> int:
        return self.subs + self.ins + self.dels

    @property
    def wer(self) -> float:
        return self.edits / self.ref_len


def align(ref: Sequence[str], hyp: Sequence[str]) -> Alignment:
    """Minimal unit-cost alignment transforming ref into hyp.

    Cost ties during backtrace prefer match over substitute over delete
    over insert, which makes the op sequence deterministic.
    """
    if len(ref) == 0:
        raise EmptyReferenceError("empty reference")
    n, m = len(ref), len(hyp)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dist[i][0] = i
    for j in range(1, m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        row, prev = dist[i], dist[i - 1]
        for j in range(1, m + 1):
            if ref[i - 1] == hyp[j - 1]:
                row[j] = prev[j - 1]
            else:
                row[j] = 1 + min(prev[j - 1], prev[j], row[j - 1])
    ops: list[EditOp] = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] and dist[i][j] == dist[i - 1][j - 1]:
            ops.append(EditOp("match", i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and dist[i][j] == dist[i - 1][j - 1] + 1:
            ops.append(EditOp("substitute", i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and dist[i][j] == dist[i - 1][j] + 1:
            ops.append(EditOp("delete", i - 1, -1))
            i = i - 1
        else:
            ops.append(EditOp("insert", -1, j - 1))
            j = j - 1
    ops.reverse()
    return Alignment(tuple(ops))


def wer(ref: Sequence[str], hyp: Sequence[str]) -> WerStats:
    alignment = align(ref, hyp)
    subs, ins, dels = alignment.counts()
    return WerStats(subs=subs, ins=ins, dels=dels, ref_len=len(ref))


def oracle_wer_nbest(ref: Sequence[str], nbest) -> tuple[WerStats, int]:
    """Best achievable WER within the N-best list and the 1-based rank of
    the hypothesis achieving it (ties go to the lowest rank)."""
    best: WerStats | None = None
    best_rank = 0
    for rank, hyp in enumerate(nbest.hyps, start=1):
        stats = wer(ref, hyp.words())
        if best is None or stats.edits < best.edits:
            best, best_rank = stats, rank
    assert best is not None
    return best, best_rank


def oracle_wer_lattice(ref: Sequence[str], lat: Lattice,
                       conv: BoundaryConvention | None = None) -> tuple[WerStats, LatticePath]:
    """Minimum word edit distance over all lattice paths, with a witness.

    Dynamic program over (word-boundary node, reference position) states.
    Words are assembled from boundary-to-boundary token runs; terminal arcs
    cost nothing and consume no reference words.
    """
    if len(ref) == 0:
        raise EmptyReferenceError("empty reference")
    conv = conv or BoundaryConvention()
    runs = word_runs(lat, conv)
    runs_from: dict[int, list] = {}
    for run in runs:
        runs_from.setdefault(run.src, []).append(run)
    for lst in runs_from.values():
        lst.sort(key=lambda r: (r.dst, r.word, r.arcs))

    order = topo_order(lat)
    R = len(ref)
    INF = float("inf")
    best: dict[tuple[int, int], float] = {(lat.start, 0): 0.0}
    # back[(node, j)] = (prev_node, prev_j, run or None for a deletion)
    back: dict[tuple[int, int], tuple[int, int, object]] = {}

    def relax(node: int, j: int, cost: float, prev: tuple[int, int, object]) -> None:
        if cost < best.get((node, j), INF):
            best[(node, j)] = cost
            back[(node, j)] = prev

    for v in order:
        for j in range(R + 1):
            cur = best.get((v, j), INF)
            if cur is INF:
                continue
            if j < R:  # skip (delete) the next reference word at this node
                relax(v, j + 1, cur + 1.0, (v, j, None))
            for run in runs_from.get(v, ()):
                if run.word is None:  # terminal run
                    relax(run.dst, j, cur, (v, j, run))
                    continue
                if j < R:
                    relax(run.dst, j + 1, cur + (0.0 if run.word == ref[j] else 1.0),
                          (v, j, run))
                relax(run.dst, j, cur + 1.0, (v, j, run))  # inserted word

    goal = (lat.end, R)
    cost = best.get(goal, INF)
    assert cost is not INF, "valid lattice must reach the end node"

    arcs: list = []
    state = goal
    while state != (lat.start, 0):
        prev_node, prev_j, run = back[state]
        if run is not None:
            arcs[:0] = run.arcs
        state = (prev_node, prev_j)
    witness = LatticePath(tuple(arcs))
    stats = wer(ref, path_words(witness.tokens, conv))
    assert stats.edits == int(cost)
    return stats, witness


def filter_pairs(pairs: Iterable[tuple[Sequence[str], Sequence[str]]],
                 threshold: float = 0.25) -> list[tuple[Sequence[str], Sequence[str]]]:
    """Keep (ref, hyp) pairs whose WER does not exceed the threshold.

    A pair at exactly the threshold is kept; only strictly higher WER is
    dropped. An empty reference raises EmptyReferenceError naming the
    pair's position.
    """
    kept = []
    for idx, (ref, hyp) in enumerate(pairs):
        if len(ref) == 0:
            raise EmptyReferenceError(f"pair {idx}: empty reference")
        if wer(ref, hyp).wer <= threshold:
            kept.append((ref, hyp))
    return kept


@dataclass
class CorpusReport:
    """Pooled corpus WER plus the per-utterance breakdown."""

    rows: list[tuple[str, WerStats]]

    @property
    def subs(self) -> int:
        return sum(s.subs for _, s in self.rows)

    @property
    def ins(self) -> int:
        return sum(s.ins for _, s in self.rows)

    @property
    def dels(self) -> int:
        return sum(s.dels for _, s in self.rows)

    @property
    def ref_len(self) -> int:
        return sum(s.ref_len for _, s in self.rows)

    @property
    def edits(self) -> int:
        return self.subs + self.ins + self.dels

    @property
    def wer(self) -> float:
        return self.edits / self.ref_len

    def to_tsv_rows(self) -> list[str]:
        out = ["id\tref_len\tsub\tins\tdel\twer"]
        for utt_id, s in self.rows:
            out.append(f"{utt_id}\t{s.ref_len}\t{s.subs}\t{s.ins}\t{s.dels}\t{s.wer:.17g}")
        out.append(f"ALL\t{self.ref_len}\t{self.subs}\t{self.ins}\t{self.dels}\t{self.wer:.17g}")
        return out

    def to_text(self) -> str:
        header = ("id", "ref_len", "sub", "ins", "del", "wer")
        body = [(u, str(s.ref_len), str(s.subs), str(s.ins), str(s.dels), f"{s.wer:.4f}")
                for u, s in self.rows]
        body.append(("ALL", str(self.ref_len), str(self.subs), str(self.ins),
                     str(self.dels), f"{self.wer:.4f}"))
        widths = [max(len(r[c]) for r in [header, *body]) for c in range(len(header))]
        lines = ["  ".join(val.ljust(w) for val, w in zip(row, widths)).rstrip()
                 for row in [header, *body]]
        return "\n".join(lines)


def corpus_report(results: Iterable[tuple[str, WerStats]]) -> CorpusReport:
    rows = list(results)
    if not rows:
        raise EmptyReferenceError("no utterances to aggregate")
    return CorpusReport(rows)
