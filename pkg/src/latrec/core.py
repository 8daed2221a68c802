"""Data model for tokens, hypotheses, N-best lists, and lattices.

All scores in the toolkit are natural-log, higher-is-better, 64-bit floats.
Lattices are arc-labeled DAGs with a single start node (no in-arcs) and a
single end node (no out-arcs); epsilon arcs are not allowed. The reserved
terminal token ``</s>`` is an ordinary arc label used by builders to route
every complete hypothesis into the shared end node.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

from .errors import CycleError, NoHypothesisError, ValidationError

EPSILON = "<eps>"
TERMINAL = "</s>"

# Tokens are plain strings; the boundary convention below is the only
# structure they carry.
Token = str


def starts_word(token: Token, marker: str) -> bool:
    """True iff ``token`` begins a new word under the boundary ``marker``."""
    return token.startswith(marker)


def check_token(token: Token, *, separator: str | None = None) -> None:
    """Raise ValidationError unless ``token`` is a legal content token.

    The reserved epsilon string is never a token. A configured encoder
    separator is also excluded so that concatenated encoder inputs stay
    unambiguous. The terminal ``</s>`` is legal: builders use it for arcs
    into the end node.
    """
    if not token:
        raise ValidationError("empty token")
    if "\t" in token or "\n" in token:
        raise ValidationError(f"token contains TAB or newline: {token!r}")
    if token == EPSILON:
        raise ValidationError(f"reserved token {EPSILON!r} is not allowed")
    if separator is not None and token != TERMINAL and token == separator:
        raise ValidationError(f"token equals the configured separator {separator!r}")


@dataclass(frozen=True)
class Hypothesis:
    """One scored transcription hypothesis.

    ``text`` is the space-joined word form. ``tokens``, when present, is the
    scored token sequence (typically sub-word tokens plus the terminal).
    ``asr_score`` is the recognizer's natural-log score.
    """

    text: str
    asr_score: float
    tokens: tuple[Token, ...] | None = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.asr_score):
            raise ValidationError(f"asr_score must be finite, got {self.asr_score!r}")
        if self.tokens is not None:
            object.__setattr__(self, "tokens", tuple(self.tokens))

    def words(self) -> list[str]:
        return self.text.split()


@dataclass(frozen=True)
class NBestList:
    """Ranked hypotheses for one utterance, best (rank 1) first.

    Construction stable-sorts by descending ``asr_score``, so ties keep
    their input order.
    """

    utt_id: str
    hyps: tuple[Hypothesis, ...]

    def __post_init__(self) -> None:
        if not self.utt_id:
            raise ValidationError("utt_id must be non-empty")
        hyps = tuple(self.hyps)
        if not hyps:
            raise ValidationError(f"N-best list for {self.utt_id!r} is empty")
        hyps = tuple(sorted(hyps, key=lambda h: -h.asr_score))
        object.__setattr__(self, "hyps", hyps)

    def top(self, n: int) -> "NBestList":
        """The first ``n`` hypotheses (all of them when fewer exist)."""
        if n < 1:
            raise ValidationError(f"n must be >= 1, got {n}")
        return NBestList(self.utt_id, self.hyps[:n])

    def __len__(self) -> int:
        return len(self.hyps)


class Arc(NamedTuple):
    src: int
    dst: int
    label: Token
    score: float


@dataclass(frozen=True)
class Lattice:
    """Directed acyclic arc-labeled scored hypothesis graph.

    Arcs are kept in canonical order, sorted by (src, dst, label). Node ids
    are expected to be contiguous in [0, num_nodes).
    """

    num_nodes: int
    start: int
    end: int
    arcs: tuple[Arc, ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "arcs",
            tuple(sorted((Arc(*a) for a in self.arcs), key=lambda a: (a.src, a.dst, a.label))),
        )

    @classmethod
    def from_arcs(cls, arcs: Iterable[tuple[int, int, Token, float]], start: int, end: int,
                  num_nodes: int | None = None) -> "Lattice":
        arc_tuple = tuple(Arc(*a) for a in arcs)
        if num_nodes is None:
            ids = {start, end}
            for a in arc_tuple:
                ids.add(a.src)
                ids.add(a.dst)
            num_nodes = max(ids) + 1
        return cls(num_nodes=num_nodes, start=start, end=end, arcs=arc_tuple)

    @cached_property
    def _out(self) -> dict[int, tuple[Arc, ...]]:
        table: dict[int, list[Arc]] = {}
        for a in self.arcs:
            table.setdefault(a.src, []).append(a)
        return {k: tuple(v) for k, v in table.items()}

    @cached_property
    def _in(self) -> dict[int, tuple[Arc, ...]]:
        table: dict[int, list[Arc]] = {}
        for a in self.arcs:
            table.setdefault(a.dst, []).append(a)
        return {k: tuple(v) for k, v in table.items()}

    def out_arcs(self, node: int) -> tuple[Arc, ...]:
        return self._out.get(node, ())

    def in_arcs(self, node: int) -> tuple[Arc, ...]:
        return self._in.get(node, ())

    def labels(self) -> set[Token]:
        return {a.label for a in self.arcs}

    def num_paths(self, limit: int | None = None) -> int:
        """Count start-to-end paths by DP; stops counting past ``limit``."""
        counts = {self.start: 1}
        total = 0
        for v in topo_order(self):
            c = counts.get(v, 0)
            if c == 0:
                continue
            if v == self.end:
                total += c
                continue
            for a in self.out_arcs(v):
                counts[a.dst] = counts.get(a.dst, 0) + c
                if limit is not None and counts[a.dst] > limit:
                    counts[a.dst] = limit + 1
        return total


@dataclass(frozen=True)
class LatticePath:
    """A start-to-end arc sequence; score is the exact sum of arc scores."""

    arcs: tuple[Arc, ...]

    def __post_init__(self) -> None:
        arcs = tuple(self.arcs)
        object.__setattr__(self, "arcs", arcs)
        for prev, cur in zip(arcs, arcs[1:]):
            if prev.dst != cur.src:
                raise ValidationError(
                    f"arcs do not chain: {prev} -> {cur}")

    @cached_property
    def tokens(self) -> tuple[Token, ...]:
        return tuple(a.label for a in self.arcs)

    @cached_property
    def score(self) -> float:
        total = 0.0
        for a in self.arcs:
            total += a.score
        return total


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_lattice(lat: Lattice) -> ValidationReport:
    """Check every structural invariant; violations are data, not errors."""
    report = ValidationReport()
    bad = report.violations

    if lat.num_nodes < 2:
        bad.append(f"num_nodes must be >= 2, got {lat.num_nodes}")
    for name, node in (("start", lat.start), ("end", lat.end)):
        if not 0 <= node < lat.num_nodes:
            bad.append(f"{name} node {node} out of range")
    if lat.start == lat.end:
        bad.append("start and end are the same node")
    if not lat.arcs:
        bad.append("lattice has no arcs")

    seen: set[tuple[int, int, Token]] = set()
    for a in lat.arcs:
        if not (0 <= a.src < lat.num_nodes and 0 <= a.dst < lat.num_nodes):
            bad.append(f"arc {a} references a node out of range")
            continue
        if not a.label:
            bad.append(f"empty label on arc ({a.src},{a.dst})")
        elif a.label == EPSILON:
            bad.append(f"epsilon label on arc ({a.src},{a.dst})")
        elif "\t" in a.label or "\n" in a.label:
            bad.append(f"label with TAB/newline on arc ({a.src},{a.dst})")
        if not math.isfinite(a.score):
            bad.append(f"non-finite score on arc ({a.src},{a.dst},{a.label!r})")
        key = (a.src, a.dst, a.label)
        if key in seen:
            bad.append(f"duplicate arc ({a.src},{a.dst},{a.label!r})")
        seen.add(key)
    if bad:
        # Node ids or labels are already broken; graph checks would only
        # produce noise on top.
        return report

    if lat.in_arcs(lat.start):
        bad.append(f"start node {lat.start} has in-arcs")
    if lat.out_arcs(lat.end):
        bad.append(f"end node {lat.end} has out-arcs")

    try:
        topo_order(lat)
    except CycleError:
        bad.append("cycle")
        return report

    reach = _reachable(lat, lat.start, forward=True)
    coreach = _reachable(lat, lat.end, forward=False)
    for v in range(lat.num_nodes):
        if v not in reach or v not in coreach:
            bad.append(f"dead node {v}")
    return report


def _reachable(lat: Lattice, origin: int, *, forward: bool) -> set[int]:
    seen = {origin}
    work = [origin]
    while work:
        v = work.pop()
        arcs = lat.out_arcs(v) if forward else lat.in_arcs(v)
        for a in arcs:
            nxt = a.dst if forward else a.src
            if nxt not in seen:
                seen.add(nxt)
                work.append(nxt)
    return seen


def topo_order(lat: Lattice) -> list[int]:
    """Topological order over all node ids, lowest id first among ready nodes.

    Raises CycleError when the arc set has a cycle. Nodes without arcs are
    emitted at the position their id becomes available, which keeps the
    output a permutation of range(num_nodes).
    """
    indeg = [0] * lat.num_nodes
    for a in lat.arcs:
        indeg[a.dst] += 1
    ready = [v for v in range(lat.num_nodes) if indeg[v] == 0]
    heapq.heapify(ready)
    order: list[int] = []
    while ready:
        v = heapq.heappop(ready)
        order.append(v)
        for a in lat.out_arcs(v):
            indeg[a.dst] -= 1
            if indeg[a.dst] == 0:
                heapq.heappush(ready, a.dst)
    if len(order) != lat.num_nodes:
        raise CycleError("lattice contains a cycle")
    return order


@dataclass
class PathSet:
    """Result of path enumeration; ``truncated`` marks a hit of max_paths."""

    paths: list[LatticePath]
    truncated: bool

    def __iter__(self):
        return iter(self.paths)

    def __len__(self) -> int:
        return len(self.paths)


def enumerate_paths(lat: Lattice, max_paths: int | None = None) -> PathSet:
    """All start-to-end paths in descending score order.

    Ties are broken by lexicographic token-sequence order. Enumeration is
    best-first with an exact completion bound, so with ``max_paths`` set it
    emits exactly the top paths without expanding the rest of the space.
    """
    if max_paths is not None and max_paths < 1:
        raise ValidationError(f"max_paths must be >= 1, got {max_paths}")
    order = topo_order(lat)  # raises on cycles

    # Exact best-to-end bound per node (max-plus, backward).
    bound: dict[int, float] = {lat.end: 0.0}
    for v in reversed(order):
        if v == lat.end:
            continue
        best = None
        for a in lat.out_arcs(v):
            b = bound.get(a.dst)
            if b is None:
                continue
            cand = a.score + b
            if best is None or cand > best:
                best = cand
        if best is not None:
            bound[v] = best

    paths: list[LatticePath] = []
    truncated = False
    if lat.start not in bound:
        return PathSet(paths, truncated)

    counter = itertools.count()
    # Heap entries: (-(score so far + bound), tokens so far, seq, node, arcs)
    heap: list[tuple[float, tuple[Token, ...], int, int, tuple[Arc, ...]]] = [
        (-bound[lat.start], (), next(counter), lat.start, ())
    ]
    while heap:
        neg, tokens, _, node, arcs = heapq.heappop(heap)
        if node == lat.end:
            paths.append(LatticePath(arcs))
            if max_paths is not None and len(paths) >= max_paths:
                truncated = bool(heap)
                break
            continue
        g = -neg - bound[node]
        for a in lat.out_arcs(node):
            b = bound.get(a.dst)
            if b is None:
                continue  # dead branch, cannot reach the end
            heapq.heappush(
                heap,
                (-(g + a.score + b), tokens + (a.label,), next(counter), a.dst, arcs + (a,)),
            )
    return PathSet(paths, truncated)


def best_path(lat: Lattice) -> LatticePath:
    """Highest-scoring path (Viterbi), ties lexicographic."""
    found = enumerate_paths(lat, max_paths=1)
    if not found.paths:
        raise NoHypothesisError("lattice has no start-to-end path")
    return found.paths[0]


def assemble_text(tokens: Sequence[Token], marker: str = "▁",
                  terminal: str = TERMINAL) -> str:
    """Render a token sequence as plain text.

    Boundary-marked sequences (first token carries the marker) are joined
    into words; bare sequences are space-joined as-is. The terminal token is
    dropped in both cases.
    """
    toks = [t for t in tokens if t != terminal]
    if not toks:
        return ""
    if starts_word(toks[0], marker):
        words: list[str] = []
        for t in toks:
            if starts_word(t, marker):
                words.append(t[len(marker):])
            else:
                words[-1] += t
        return " ".join(words)
    return " ".join(toks)
