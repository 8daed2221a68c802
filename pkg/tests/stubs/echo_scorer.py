"""Minimal wire-protocol scorer stub for client tests.

Returns a fixed log-probability for every candidate, so score_sequence is
exactly -1.0 times the target length. Flags simulate failure modes:
--die-after N exits abruptly after N requests, --fail-op OP answers that
op with ok:false.
"""

import argparse
import json
import sys


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--logprob", type=float, default=-1.0)
    parser.add_argument("--die-after", type=int, default=0)
    parser.add_argument("--fail-op", default="")
    args = parser.parse_args()

    handled = 0
    sessions = 0
    for line in sys.stdin:
        handled += 1
        if args.die_after and handled > args.die_after:
            sys.exit(1)
        try:
            req = json.loads(line)
        except json.JSONDecodeError:
            print(json.dumps({"rid": None, "ok": False, "error": "parse error"}), flush=True)
            continue
        rid = req.get("rid")
        op = req.get("op")
        if op == args.fail_op:
            print(json.dumps({"rid": rid, "ok": False, "error": f"forced failure for {op}"}),
                  flush=True)
            continue
        if op == "start":
            sessions += 1
            reply = {"rid": rid, "ok": True, "session": f"s{sessions}"}
        elif op == "next_logprobs":
            reply = {"rid": rid, "ok": True,
                     "logprobs": [args.logprob] * len(req.get("candidates", []))}
        elif op == "score_sequence":
            reply = {"rid": rid, "ok": True,
                     "logprob": args.logprob * len(req.get("target", []))}
        elif op == "tokenize":
            word = req.get("word", "")
            reply = {"rid": rid, "ok": True, "tokens": ["▁" + word]}
        elif op == "end":
            reply = {"rid": rid, "ok": True}
        else:
            reply = {"rid": rid, "ok": False, "error": f"unknown op {op!r}"}
        print(json.dumps(reply), flush=True)


if __name__ == "__main__":
    main()
