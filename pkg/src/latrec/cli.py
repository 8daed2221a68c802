"""Command-line front-end.

Subcommands: simulate, retokenize, decode, sweep, wer, oracle, filter.
Every output file starts with a comment header carrying the tool version
and the full run configuration, and repeated runs with the same
configuration and seed produce byte-identical delimited outputs. Report
subcommands also render figures next to their TSV outputs unless
--no-figure is given.

Exit codes: 0 success, 1 validation/input error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import os
import sys
import threading
from typing import Callable, Sequence

from . import __version__
from .core import Lattice, NBestList, validate_lattice
from .decode import (SweepUtt, decode_lattice, decode_unconstrained,
                     lambda_grid, rescore_nbest, sweep_lambda)
from .errors import (EmptyReferenceError, LatrecError, ParseError,
                     SegmentationError, TokenizerError, ValidationError)
from .external import ExternalWordTokenizer, external_scorer_client
from .formats import (config_header, format_score, lattice_path,
                      read_lattice, read_nbest_jsonl, read_ref_tsv,
                      write_hyps_tsv, write_lattice, write_nbest_jsonl,
                      write_ref_tsv)
from .metrics import corpus_report, oracle_wer_lattice, oracle_wer_nbest, wer
from .retokenize import (BoundaryConvention, GreedyVocabTokenizer,
                         bpe_to_word, word_to_plm_bpe)
from .scoring import (DEFAULT_PREFIX, DEFAULT_SEPARATOR, NgramScorer, Scorer,
                      build_encoder_input)

SCORER_ENV = "LATREC_SCORER"


def _config_of(args: argparse.Namespace) -> dict:
    skip = {"func", "command"}
    config = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    return {"command": args.command, **config}


def _header(args: argparse.Namespace) -> list[str]:
    return config_header(_config_of(args), __version__)


# ---------------------------------------------------------------------------
# Scorer construction


def make_scorer_factory(spec: str, order: int, alpha: float) -> Callable[[], Scorer]:
    """One factory call per worker; ngram scorers are shared read-only."""
    if spec.startswith("ngram:"):
        rest = spec[len("ngram:"):]
        if ":" in rest and rest.rsplit(":", 1)[1].isdigit():
            path, order_s = rest.rsplit(":", 1)
            order = int(order_s)
        else:
            path = rest
        if not path:
            raise ValidationError("ngram scorer spec needs a training-text path")
        scorer = NgramScorer.from_text_file(path, order=order, alpha=alpha)
        return lambda: scorer
    if spec.startswith("external:"):
        endpoint = spec[len("external:"):]
        if not endpoint:
            raise ValidationError("external scorer spec needs a command or host:port")
        return lambda: external_scorer_client(endpoint)
    raise ValidationError(f"unknown scorer spec {spec!r}; use ngram:... or external:...")


class _WorkerScorers:
    """Thread-local scorer instances so external connections are not shared."""

    def __init__(self, factory: Callable[[], Scorer]):
        self._factory = factory
        self._local = threading.local()
        self._all: list[Scorer] = []
        self._lock = threading.Lock()

    def get(self) -> Scorer:
        scorer = getattr(self._local, "scorer", None)
        if scorer is None:
            scorer = self._factory()
            self._local.scorer = scorer
            with self._lock:
                self._all.append(scorer)
        return scorer

    def close(self) -> None:
        for scorer in self._all:
            close = getattr(scorer, "close", None)
            if close is not None:
                close()


def _run_parallel(jobs: int, items: Sequence, fn: Callable) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args: argparse.Namespace) -> int:
    from .simulate import simulate_corpus

    os.makedirs(args.out, exist_ok=True)
    lat_dir = os.path.join(args.out, "corpus.lat")
    os.makedirs(lat_dir, exist_ok=True)
    corpus = simulate_corpus(seed=args.seed, utts=args.utts, beam_width=args.beam,
                             k=args.k, rho=args.rho, spread=args.spread,
                             min_words=args.min_words, max_words=args.max_words)
    header = _header(args)
    write_nbest_jsonl(os.path.join(args.out, "corpus.nbest.jsonl"),
                      (u.nbest for u in corpus.utterances), header)
    write_ref_tsv(os.path.join(args.out, "corpus.ref.tsv"),
                  ((u.utt_id, " ".join(u.ref_words)) for u in corpus.utterances), header)
    for u in corpus.utterances:
        write_lattice(lattice_path(lat_dir, u.utt_id), u.lattice, header)
    print(f"wrote {len(corpus)} utterances to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# retokenize


def cmd_retokenize(args: argparse.Namespace) -> int:
    conv = BoundaryConvention(marker=args.marker, terminal=args.terminal)
    lat = read_lattice(getattr(args, "in"))
    report = validate_lattice(lat)
    if not report.ok:
        raise ValidationError("input lattice is invalid: " + "; ".join(report.violations))
    if args.mode == "bpe2word":
        out = bpe_to_word(lat, conv)
    else:
        if args.vocab:
            tok = GreedyVocabTokenizer.from_file(args.vocab, conv)
            out = word_to_plm_bpe(lat, tok)
        elif args.scorer and args.scorer.startswith("external:"):
            with external_scorer_client(args.scorer[len("external:"):]) as scorer:
                out = word_to_plm_bpe(lat, ExternalWordTokenizer(scorer, conv))
        else:
            raise ValidationError("word2plm needs --vocab FILE or --scorer external:...")
    write_lattice(args.out, out, _header(args))
    print(f"wrote {args.out}: {out.num_nodes} nodes, {len(out.arcs)} arcs")
    return 0


# ---------------------------------------------------------------------------
# decode


def _load_corpus(nbest_file: str, ref_file: str | None, lattices: str | None,
                 need_lattice: bool) -> list[SweepUtt]:
    nbests = read_nbest_jsonl(nbest_file)
    refs = read_ref_tsv(ref_file) if ref_file else {}
    utts: list[SweepUtt] = []
    for nb in sorted(nbests, key=lambda n: n.utt_id):
        lat: Lattice | None = None
        if lattices:
            path = lattice_path(lattices, nb.utt_id)
            if os.path.exists(path):
                lat = read_lattice(path)
            elif need_lattice:
                raise ValidationError(f"no lattice for utterance {nb.utt_id!r} in {lattices}")
        elif need_lattice:
            raise ValidationError("this mode needs --lattices DIR")
        ref_words = refs.get(nb.utt_id, "").split() if refs else []
        utts.append(SweepUtt(nb.utt_id, ref_words, nb, lat))
    return utts


def cmd_decode(args: argparse.Namespace) -> int:
    conv = BoundaryConvention(marker=args.marker, terminal=args.terminal)
    utts = _load_corpus(args.nbest, None, args.lattices, args.mode == "lattice")
    factory = make_scorer_factory(args.scorer, args.order, args.alpha)
    scorers = _WorkerScorers(factory)
    beam = None if args.b in ("inf", "0") else int(args.b)

    vocabulary = None
    if args.vocab:
        with open(args.vocab, "r", encoding="utf-8") as fh:
            vocabulary = [line.strip() for line in fh if line.strip()]

    def one(utt: SweepUtt):
        scorer = scorers.get()
        enc = build_encoder_input(utt.nbest, args.n, args.prefix, args.separator)
        if args.mode == "unconstrained":
            res = decode_unconstrained(scorer, enc, beam=beam or 10,
                                       max_len=args.max_len,
                                       vocabulary=vocabulary, conv=conv)
        elif args.mode == "nbest":
            res, _ = rescore_nbest(scorer, enc, utt.nbest.top(args.n), args.lam)
        else:
            res = decode_lattice(scorer, enc, utt.lattice, args.lam, beam, conv)
        return (utt.utt_id, res.text, res.combined, res.ec_score, res.asr_score)

    try:
        rows = _run_parallel(args.jobs, utts, one)
    finally:
        scorers.close()
    rows.sort(key=lambda r: r[0])
    write_hyps_tsv(args.out, rows, _header(args))
    print(f"wrote {len(rows)} hypotheses to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# sweep


def cmd_sweep(args: argparse.Namespace) -> int:
    conv = BoundaryConvention(marker=args.marker, terminal=args.terminal)
    utts = _load_corpus(args.nbest, args.ref, args.lattices, args.mode == "lattice")
    for utt in utts:
        if not utt.ref_words:
            raise ValidationError(f"no reference for utterance {utt.utt_id!r}")
    factory = make_scorer_factory(args.scorer, args.order, args.alpha)
    scorer = factory()
    beam = None if args.b in ("inf", "0") else int(args.b)
    try:
        result = sweep_lambda(args.mode, utts, scorer, grid_step=args.grid,
                              n=args.n, prefix=args.prefix,
                              separator=args.separator, beam=beam, conv=conv)
    finally:
        close = getattr(scorer, "close", None)
        if close is not None:
            close()
    lines = _header(args) + ["lambda\twer\tsub\tins\tdel\tref_len"]
    decimals = max(len(str(args.grid).split(".")[-1]), 2)
    for row in result.rows:
        s = row.stats
        lines.append(f"{row.lam:.{decimals}f}\t{format_score(s.wer)}"
                     f"\t{s.subs}\t{s.ins}\t{s.dels}\t{s.ref_len}")
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"best lambda {result.best_lam:g} at corpus WER "
          f"{dict(result.table())[result.best_lam]:.4f}")
    if not args.no_figure:
        figure = os.path.splitext(args.out)[0] + ".png"
        from .reports import render_sweep_figure

        render_sweep_figure(result.table(), result.best_lam, figure,
                            title=f"{args.mode} sweep")
        print(f"wrote {figure}")
    return 0


# ---------------------------------------------------------------------------
# wer / oracle / filter


def _read_pairs(ref_file: str, hyp_file: str) -> list[tuple[str, list[str], list[str]]]:
    refs = read_ref_tsv(ref_file)
    hyps = read_ref_tsv(hyp_file)
    missing = [u for u in refs if u not in hyps]
    if missing:
        raise ValidationError(f"hypotheses missing for {len(missing)} utterances, "
                              f"first: {missing[0]!r}")
    return [(u, refs[u].split(), hyps[u].split()) for u in sorted(refs)]


def cmd_wer(args: argparse.Namespace) -> int:
    pairs = _read_pairs(args.ref, args.hyp)
    report = corpus_report([(u, wer(r, h)) for u, r, h in pairs])
    print(report.to_text())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(_header(args) + report.to_tsv_rows()) + "\n")
        print(f"wrote {args.out}")
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    if not args.nbest and not args.lattices:
        raise ValidationError("oracle needs --nbest FILE and/or --lattices DIR")
    conv = BoundaryConvention(marker=args.marker, terminal=args.terminal)
    refs = read_ref_tsv(args.ref)
    topk = [int(x) for x in args.topk.split(",") if x] if args.nbest else []
    nbests = {nb.utt_id: nb for nb in read_nbest_jsonl(args.nbest)} if args.nbest else {}

    columns = [f"top{k}" for k in topk] + (["lattice"] if args.lattices else [])
    per_utt: list[tuple[str, dict[str, object]]] = []
    for utt_id in sorted(refs):
        ref_words = refs[utt_id].split()
        row: dict[str, object] = {}
        if nbests:
            if utt_id not in nbests:
                raise ValidationError(f"no N-best entry for utterance {utt_id!r}")
            for k in topk:
                stats, _ = oracle_wer_nbest(ref_words, nbests[utt_id].top(k))
                row[f"top{k}"] = stats
        if args.lattices:
            lat = read_lattice(lattice_path(args.lattices, utt_id))
            stats, _ = oracle_wer_lattice(ref_words, lat, conv)
            row["lattice"] = stats
        per_utt.append((utt_id, row))

    pooled: dict[str, float] = {}
    lines = _header(args) + ["id\t" + "\t".join(columns)]
    for utt_id, row in per_utt:
        lines.append(utt_id + "\t" + "\t".join(
            format_score(row[c].wer) for c in columns))
    for c in columns:
        edits = sum(row[c].edits for _, row in per_utt)
        ref_len = sum(row[c].ref_len for _, row in per_utt)
        pooled[c] = edits / ref_len
    lines.append("ALL\t" + "\t".join(format_score(pooled[c]) for c in columns))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    summary = "  ".join(f"{c}={100 * pooled[c]:.2f}%" for c in columns)
    print(f"pooled oracle WER: {summary}")
    print(f"wrote {args.out}")
    if not args.no_figure:
        figure = os.path.splitext(args.out)[0] + ".png"
        from .reports import render_oracle_figure

        render_oracle_figure(pooled, figure)
        print(f"wrote {figure}")
    return 0


def cmd_filter(args: argparse.Namespace) -> int:
    pairs = _read_pairs(args.ref, args.hyp)
    kept_rows = []
    for idx, (utt_id, ref_words, hyp_words) in enumerate(pairs):
        if not ref_words:
            raise EmptyReferenceError(f"pair {idx} ({utt_id}): empty reference")
        if wer(ref_words, hyp_words).wer <= args.threshold:
            kept_rows.append((utt_id, " ".join(ref_words), " ".join(hyp_words)))
    with open(args.out, "w", encoding="utf-8") as fh:
        for line in _header(args):
            fh.write(line + "\n")
        for utt_id, ref_text, hyp_text in kept_rows:
            fh.write(f"{utt_id}\t{ref_text}\t{hyp_text}\n")
    print(f"kept {len(kept_rows)} of {len(pairs)} pairs "
          f"(threshold {args.threshold:g})")
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latrec",
        description="Hypothesis lattice / N-best rescoring toolkit")
    parser.add_argument("--version", action="version", version=f"latrec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_conv(p: argparse.ArgumentParser) -> None:
        p.add_argument("--marker", default="▁",
                       help="word-boundary marker prefix (default: %(default)s)")
        p.add_argument("--terminal", default="</s>",
                       help="sentence-end token (default: %(default)s)")

    def add_scorer(p: argparse.ArgumentParser) -> None:
        p.add_argument("--scorer", default=os.environ.get(SCORER_ENV),
                       help="ngram:PATH[:ORDER] or external:CMD or external:HOST:PORT "
                            f"(default: ${SCORER_ENV})")
        p.add_argument("--order", type=int, default=3, help="ngram order (default: 3)")
        p.add_argument("--alpha", type=float, default=1.0,
                       help="ngram smoothing (default: 1.0)")

    def add_encoder(p: argparse.ArgumentParser) -> None:
        p.add_argument("--n", type=int, default=10,
                       help="N-best size for the encoder input (default: 10)")
        p.add_argument("--prefix", default=DEFAULT_PREFIX,
                       help="encoder input prefix (default: %(default)r)")
        p.add_argument("--separator", default=DEFAULT_SEPARATOR,
                       help="hypothesis separator token (default: %(default)r)")

    p = sub.add_parser("simulate", help="generate a toy corpus of N-best lists and lattices")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--utts", type=int, required=True)
    p.add_argument("--k", type=int, default=4, help="merge context size (default: 4)")
    p.add_argument("--beam", type=int, default=10, help="beam width (default: 10)")
    p.add_argument("--rho", type=float, default=0.3,
                   help="channel corruption rate (default: 0.3)")
    p.add_argument("--spread", type=float, default=0.3,
                   help="probability mass left for channel alternatives (default: 0.3)")
    p.add_argument("--min-words", type=int, default=6)
    p.add_argument("--max-words", type=int, default=12)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("retokenize", help="convert a lattice between token spaces")
    p.add_argument("--in", required=True, help="input .lat file")
    p.add_argument("--mode", choices=["bpe2word", "word2plm"], required=True)
    p.add_argument("--vocab", help="token vocabulary file for word2plm")
    p.add_argument("--scorer", default=os.environ.get(SCORER_ENV),
                   help="external:... scorer whose tokenize op splits words")
    p.add_argument("--out", required=True, help="output .lat file")
    add_conv(p)
    p.set_defaults(func=cmd_retokenize)

    p = sub.add_parser("decode", help="decode with ASR/correction score interpolation")
    p.add_argument("--mode", choices=["unconstrained", "nbest", "lattice"], required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.75,
                   help="correction-model weight in [0,1] (default: 0.75)")
    p.add_argument("--b", default="1",
                   help="lattice beam per node; 'inf' or 0 for unbounded (default: 1)")
    p.add_argument("--max-len", type=int, default=64,
                   help="unconstrained mode length cap (default: 64)")
    p.add_argument("--vocab", help="vocabulary file for unconstrained mode")
    p.add_argument("--nbest", required=True, help="N-best JSONL file")
    p.add_argument("--lattices", help="directory of .lat files (lattice mode)")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers (default: 1)")
    p.add_argument("--out", required=True, help="output hypotheses TSV")
    add_scorer(p)
    add_encoder(p)
    add_conv(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("sweep", help="grid-search the interpolation weight")
    p.add_argument("--mode", choices=["nbest", "lattice"], default="nbest")
    p.add_argument("--grid", type=float, default=0.05,
                   help="grid step over [0,1] (default: 0.05)")
    p.add_argument("--b", default="1", help="lattice beam per node (default: 1)")
    p.add_argument("--ref", required=True, help="reference TSV")
    p.add_argument("--nbest", required=True, help="N-best JSONL file")
    p.add_argument("--lattices", help="directory of .lat files (lattice mode)")
    p.add_argument("--out", required=True, help="output sweep TSV")
    p.add_argument("--no-figure", action="store_true", help="skip the PNG figure")
    add_scorer(p)
    add_encoder(p)
    add_conv(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("wer", help="score hypotheses against references")
    p.add_argument("--ref", required=True, help="reference TSV")
    p.add_argument("--hyp", required=True, help="hypothesis TSV (id, text, ...)")
    p.add_argument("--out", help="optional per-utterance report TSV")
    p.set_defaults(func=cmd_wer)

    p = sub.add_parser("oracle", help="oracle WER over N-best lists and lattices")
    p.add_argument("--ref", required=True, help="reference TSV")
    p.add_argument("--nbest", help="N-best JSONL file")
    p.add_argument("--lattices", help="directory of .lat files")
    p.add_argument("--topk", default="1,5,10",
                   help="N-best truncations to report (default: 1,5,10)")
    p.add_argument("--out", required=True, help="output report TSV")
    p.add_argument("--no-figure", action="store_true", help="skip the PNG figure")
    add_conv(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("filter", help="drop training pairs above a WER threshold")
    p.add_argument("--ref", required=True, help="reference TSV")
    p.add_argument("--hyp", required=True, help="hypothesis TSV")
    p.add_argument("--threshold", type=float, default=0.25,
                   help="keep pairs with WER <= threshold (default: 0.25)")
    p.add_argument("--out", required=True, help="output TSV of kept pairs")
    p.set_defaults(func=cmd_filter)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "scorer", None) is None and args.command in ("decode", "sweep"):
        parser.error(f"--scorer is required (or set ${SCORER_ENV})")
    try:
        return args.func(args)
    except (ValidationError, ParseError, SegmentationError, TokenizerError,
            EmptyReferenceError, FileNotFoundError, NotADirectoryError) as e:
        print(f"latrec {args.command}: error: {e}", file=sys.stderr)
        return 1
    except LatrecError as e:
        print(f"latrec {args.command}: runtime error: {e}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
