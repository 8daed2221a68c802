"""Shared test utilities: independent oracles and random lattice generators.

The oracles here are deliberately naive re-derivations (recursive path
enumeration, full-matrix edit distance, argmax over scored paths) kept
separate from the library code paths they check.
"""

from __future__ import annotations

import numpy as np

from latrec.core import Arc, Lattice
from latrec.decode import interpolate

MARKER = "▁"
TERMINAL = "</s>"


def recursive_paths(lat: Lattice) -> list[tuple[tuple[str, ...], float]]:
    """Plain recursive enumeration of (tokens, score) over all paths."""
    out: list[tuple[tuple[str, ...], float]] = []

    def go(node: int, tokens: tuple[str, ...], score: float) -> None:
        if node == lat.end:
            out.append((tokens, score))
            return
        for a in lat.out_arcs(node):
            go(a.dst, tokens + (a.label,), score + a.score)

    go(lat.start, (), 0.0)
    return out


def quadratic_edit_distance(ref, hyp) -> int:
    """Independent full-matrix unit-cost edit distance."""
    n, m = len(ref), len(hyp)
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        d[i][0] = i
    for j in range(m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            if ref[i - 1] == hyp[j - 1]:
                d[i][j] = d[i - 1][j - 1]
            else:
                d[i][j] = 1 + min(d[i - 1][j - 1], d[i - 1][j], d[i][j - 1])
    return d[n][m]


def brute_force_decode(scorer, enc, lat: Lattice, lam: float):
    """Argmax of interpolated score over every enumerated path."""
    from latrec.core import enumerate_paths

    scored = []
    for p in enumerate_paths(lat).paths:
        ec = scorer.score_sequence(enc, p.tokens)
        scored.append((interpolate(lam, p.score, ec), p.tokens, p.score, ec))
    scored.sort(key=lambda t: (-t[0], t[1]))
    return scored[0]


def random_token_lattice(rng: np.random.Generator, labels: str = "abcde",
                         max_layers: int = 4, max_width: int = 3,
                         max_paths: int | None = None) -> Lattice:
    """Layered random DAG lattice with single-letter labels.

    Every node gets at least one in-arc from the previous layer and one
    out-arc to the next, so the result is always valid.
    """
    while True:
        n_layers = int(rng.integers(1, max_layers + 1))
        layers: list[list[int]] = [[0]]
        nid = 1
        for _ in range(n_layers):
            width = int(rng.integers(1, max_width + 1))
            layers.append(list(range(nid, nid + width)))
            nid += width
        layers.append([nid])  # end node
        nid += 1

        arcs: set[tuple[int, int, str]] = set()
        scores: dict[tuple[int, int, str], float] = {}

        def add(src: int, dst: int) -> None:
            label = labels[int(rng.integers(len(labels)))]
            key = (src, dst, label)
            if key not in arcs:
                arcs.add(key)
                scores[key] = -float(rng.uniform(0.05, 3.0))

        for prev, cur in zip(layers, layers[1:]):
            for dst in cur:
                add(prev[int(rng.integers(len(prev)))], dst)
            for src in prev:
                add(src, cur[int(rng.integers(len(cur)))])
            extra = int(rng.integers(0, len(cur) + 1))
            for _ in range(extra):
                add(prev[int(rng.integers(len(prev)))], cur[int(rng.integers(len(cur)))])

        lat = Lattice.from_arcs(
            [Arc(s, d, lab, scores[(s, d, lab)]) for s, d, lab in arcs],
            start=0, end=layers[-1][0], num_nodes=nid)
        if max_paths is None or lat.num_paths(max_paths) <= max_paths:
            return lat


_SYLLABLES = ["ka", "ri", "to", "mu", "sel", "da", "pon", "vi", "ne", "lu"]


def random_bpe_lattice(rng: np.random.Generator, min_slots: int = 2,
                       max_slots: int = 4, max_paths: int | None = 400,
                       with_terminal: bool = True) -> Lattice:
    """Word-slot lattice with boundary-marked sub-token chains.

    Each slot offers a few word variants; some variants share a first
    piece and fork mid-word, and some duplicate another variant's word
    through a different decomposition (exercising the max-collapse).
    """
    while True:
        slots = int(rng.integers(min_slots, max_slots + 1))
        arcs: list[Arc] = []
        seen: set[tuple[int, int, str]] = set()
        nid = 1
        cur = 0

        def syl() -> str:
            return _SYLLABLES[int(rng.integers(len(_SYLLABLES)))]

        def score() -> float:
            return -float(rng.uniform(0.05, 2.0))

        def add(src: int, dst: int, label: str) -> bool:
            key = (src, dst, label)
            if key in seen:
                return False
            seen.add(key)
            arcs.append(Arc(src, dst, label, score()))
            return True

        def chain(src: int, dst: int, pieces: list[str]) -> None:
            nonlocal nid
            node = src
            for i, piece in enumerate(pieces):
                last = i == len(pieces) - 1
                if last:
                    add(node, dst, piece)
                else:
                    add(node, nid, piece)
                    node = nid
                    nid += 1

        for _ in range(slots):
            nxt = nid
            nid += 1
            variants = int(rng.integers(1, 4))
            made_words: list[list[str]] = []
            for _ in range(variants):
                n_pieces = int(rng.integers(1, 4))
                pieces = [MARKER + syl()] + [syl() for _ in range(n_pieces - 1)]
                chain(cur, nxt, pieces)
                made_words.append(pieces)
            if rng.random() < 0.35 and made_words:
                # same word, different decomposition: collapse keeps the max
                pieces = made_words[0]
                word = "".join(pieces)[len(MARKER):]
                if len(word) > 2:
                    cut = int(rng.integers(1, len(word)))
                    chain(cur, nxt, [MARKER + word[:cut], word[cut:]])
            if rng.random() < 0.3:
                # mid-word fork: shared first piece, two continuations
                mid = nid
                nid += 1
                add(cur, mid, MARKER + syl())
                add(mid, nxt, syl())
                add(mid, nxt, syl())
            cur = nxt
        if with_terminal:
            add(cur, nid, TERMINAL)
            end = nid
            nid += 1
        else:
            end = cur
        lat = Lattice.from_arcs(arcs, start=0, end=end, num_nodes=nid)
        if max_paths is None or lat.num_paths(max_paths) <= max_paths:
            return lat
