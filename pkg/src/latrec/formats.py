"""File formats: N-best JSONL, .lat lattices, reference and hypothesis TSV.

All formats are UTF-8 text. Lines starting with ``#`` are comments except
for the ``#LAT1`` magic and the ``#start``/``#end`` directives of the
lattice format. Scores in the TSV/lattice formats are rendered with 17
significant digits so that 64-bit floats round-trip exactly.
"""

from __future__ import annotations

import json
import math
import os
from typing import Iterable, Iterator, Sequence

from .core import Arc, Hypothesis, Lattice, NBestList
from .errors import ParseError

LAT_MAGIC = "#LAT1"


def format_score(x: float) -> str:
    return format(x, ".17g")


def config_header(config: dict, version: str) -> list[str]:
    """Comment lines recording the tool version and the full run config."""
    return [
        f"# latrec {version}",
        "# config: " + json.dumps(config, sort_keys=True, ensure_ascii=False),
    ]


def _open_lines(path: str) -> Iterator[tuple[int, str]]:
    with open(path, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            yield i, line.rstrip("\n")


# ---------------------------------------------------------------------------
# N-best JSONL: one object per line:
# {"id": str, "hyps": [{"text": str, "tokens": [str]?, "score": number}]}


def write_nbest_jsonl(path: str, nbests: Iterable[NBestList], header: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in header:
            fh.write(line + "\n")
        for nb in nbests:
            hyps = []
            for h in nb.hyps:
                obj: dict = {"text": h.text, "score": h.asr_score}
                if h.tokens is not None:
                    obj["tokens"] = list(h.tokens)
                hyps.append(obj)
            fh.write(json.dumps({"id": nb.utt_id, "hyps": hyps}, ensure_ascii=False) + "\n")


def read_nbest_jsonl(path: str) -> list[NBestList]:
    out: list[NBestList] = []
    seen: set[str] = set()
    for lineno, line in _open_lines(path):
        if not line.strip() or line.startswith("#"):
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", path, lineno) from None
        if not isinstance(obj, dict):
            raise ParseError("expected a JSON object", path, lineno)
        utt_id = obj.get("id")
        if not isinstance(utt_id, str) or not utt_id:
            raise ParseError('missing or empty field "id"', path, lineno)
        if utt_id in seen:
            raise ParseError(f"duplicate utterance id {utt_id!r}", path, lineno)
        seen.add(utt_id)
        hyps_raw = obj.get("hyps")
        if not isinstance(hyps_raw, list) or not hyps_raw:
            raise ParseError('missing or empty field "hyps"', path, lineno)
        hyps = []
        for k, h in enumerate(hyps_raw):
            if not isinstance(h, dict):
                raise ParseError(f"hyp {k} is not an object", path, lineno)
            if "text" not in h or not isinstance(h["text"], str):
                raise ParseError(f'hyp {k}: missing field "text"', path, lineno)
            if "score" not in h:
                raise ParseError(f'hyp {k}: missing field "score"', path, lineno)
            score = h["score"]
            if not isinstance(score, (int, float)) or isinstance(score, bool) \
                    or not math.isfinite(float(score)):
                raise ParseError(f'hyp {k}: field "score" must be a finite number', path, lineno)
            tokens = h.get("tokens")
            if tokens is not None:
                if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
                    raise ParseError(f'hyp {k}: field "tokens" must be a list of strings',
                                     path, lineno)
                tokens = tuple(tokens)
            hyps.append(Hypothesis(text=h["text"], asr_score=float(score), tokens=tokens))
        out.append(NBestList(utt_id, tuple(hyps)))
    return out


# ---------------------------------------------------------------------------
# Lattice .lat: line 1 "#LAT1", "#start <id>", "#end <id>", then arc lines
# "src\tdst\tlabel\tscore"; other #-lines are comments.


def write_lattice(path: str, lat: Lattice, header: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(LAT_MAGIC + "\n")
        for line in header:
            fh.write(line + "\n")
        fh.write(f"#start {lat.start}\n")
        fh.write(f"#end {lat.end}\n")
        for a in lat.arcs:  # canonical (src, dst, label) order
            fh.write(f"{a.src}\t{a.dst}\t{a.label}\t{format_score(a.score)}\n")


def read_lattice(path: str) -> Lattice:
    start: int | None = None
    end: int | None = None
    arcs: list[Arc] = []
    first = True
    for lineno, line in _open_lines(path):
        if first:
            if line != LAT_MAGIC:
                raise ParseError(f"expected {LAT_MAGIC} magic on line 1", path, lineno)
            first = False
            continue
        if not line.strip():
            continue
        if line.startswith("#"):
            fields = line[1:].split()
            if fields and fields[0] in ("start", "end"):
                if len(fields) != 2 or not fields[1].isdigit():
                    raise ParseError(f"malformed #{fields[0]} directive", path, lineno)
                if fields[0] == "start":
                    if start is not None:
                        raise ParseError("duplicate #start directive", path, lineno)
                    start = int(fields[1])
                else:
                    if end is not None:
                        raise ParseError("duplicate #end directive", path, lineno)
                    end = int(fields[1])
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise ParseError("expected 4 tab-separated fields", path, lineno)
        src_s, dst_s, label, score_s = parts
        try:
            src, dst = int(src_s), int(dst_s)
        except ValueError:
            raise ParseError("node ids must be integers", path, lineno) from None
        if src < 0 or dst < 0:
            raise ParseError("node ids must be non-negative", path, lineno)
        if not label:
            raise ParseError("empty arc label", path, lineno)
        try:
            score = float(score_s)
        except ValueError:
            raise ParseError(f"invalid score {score_s!r}", path, lineno) from None
        if not math.isfinite(score):
            raise ParseError(f"non-finite score {score_s!r}", path, lineno)
        arcs.append(Arc(src, dst, label, score))
    if first:
        raise ParseError("empty file", path, 1)
    if start is None:
        raise ParseError("missing #start directive", path)
    if end is None:
        raise ParseError("missing #end directive", path)
    if not arcs:
        raise ParseError("lattice has no arcs", path)
    return Lattice.from_arcs(arcs, start=start, end=end)


def lattice_path(directory: str, utt_id: str) -> str:
    return os.path.join(directory, f"{utt_id}.lat")


def read_lattice_dir(directory: str) -> dict[str, Lattice]:
    out: dict[str, Lattice] = {}
    for name in sorted(os.listdir(directory)):
        if name.endswith(".lat"):
            out[name[:-4]] = read_lattice(os.path.join(directory, name))
    return out


# ---------------------------------------------------------------------------
# Reference TSV: "id<TAB>text". Hypotheses TSV:
# "id<TAB>text<TAB>combined<TAB>ec_score<TAB>asr_score".


def write_ref_tsv(path: str, refs: Iterable[tuple[str, str]], header: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in header:
            fh.write(line + "\n")
        for utt_id, text in refs:
            fh.write(f"{utt_id}\t{text}\n")


def read_ref_tsv(path: str) -> dict[str, str]:
    """id -> text, insertion-ordered. Also reads the first two columns of
    wider TSVs such as hypothesis files."""
    out: dict[str, str] = {}
    for lineno, line in _open_lines(path):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 2:
            raise ParseError("expected at least 2 tab-separated fields", path, lineno)
        utt_id, text = parts[0], parts[1]
        if not utt_id:
            raise ParseError("empty utterance id", path, lineno)
        if utt_id in out:
            raise ParseError(f"duplicate utterance id {utt_id!r}", path, lineno)
        out[utt_id] = text
    return out


def write_hyps_tsv(path: str, rows: Iterable[tuple[str, str, float, float, float]],
                   header: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in header:
            fh.write(line + "\n")
        for utt_id, text, combined, ec, asr in rows:
            fh.write(f"{utt_id}\t{text}\t{format_score(combined)}"
                     f"\t{format_score(ec)}\t{format_score(asr)}\n")


def read_hyps_tsv(path: str) -> list[tuple[str, str, float, float, float]]:
    rows: list[tuple[str, str, float, float, float]] = []
    for lineno, line in _open_lines(path):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise ParseError("expected 5 tab-separated fields", path, lineno)
        try:
            rows.append((parts[0], parts[1], float(parts[2]), float(parts[3]), float(parts[4])))
        except ValueError:
            raise ParseError("invalid score field", path, lineno) from None
    return rows
