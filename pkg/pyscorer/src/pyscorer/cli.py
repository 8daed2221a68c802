"""Command-line entry: pick a backend and a transport, then serve."""

from __future__ import annotations

import argparse
import sys

from .backends import BackendError, DEFAULT_PREFIX, DEFAULT_SEPARATOR, make_backend
from .server import serve_stdio, serve_tcp


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pyscorer",
        description="Sequence scorer process speaking newline-delimited JSON")
    parser.add_argument("--backend", default="consensus",
                        help="consensus or hf:MODEL_NAME (default: consensus)")
    parser.add_argument("--transport", default="stdio",
                        help="stdio or tcp:PORT (default: stdio)")
    parser.add_argument("--host", default="127.0.0.1", help="tcp bind host")
    parser.add_argument("--prefix", default=DEFAULT_PREFIX,
                        help="encoder input prefix to strip (consensus)")
    parser.add_argument("--separator", default=DEFAULT_SEPARATOR,
                        help="hypothesis separator token (consensus)")
    parser.add_argument("--alpha", type=float, default=0.1,
                        help="vote smoothing (consensus, default: 0.1)")
    parser.add_argument("--device", default="cpu", help="hf backend device")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        backend = make_backend(args.backend, prefix=args.prefix,
                               separator=args.separator, alpha=args.alpha,
                               device=args.device)
    except BackendError as e:
        print(f"pyscorer: {e}", file=sys.stderr)
        return 1
    if args.transport == "stdio":
        serve_stdio(backend)
        return 0
    if args.transport.startswith("tcp:"):
        try:
            port = int(args.transport[len("tcp:"):])
        except ValueError:
            print(f"pyscorer: bad tcp port in {args.transport!r}", file=sys.stderr)
            return 1
        serve_tcp(backend, args.host, port)
        return 0
    print(f"pyscorer: unknown transport {args.transport!r}", file=sys.stderr)
    return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
