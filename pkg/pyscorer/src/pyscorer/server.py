"""Newline-delimited JSON request loop.

One request per line; one response line per request. Responses echo the
request's "rid". A failing request answers {"ok": false, "error": ...}
and the loop keeps serving. Supported ops: start, next_logprobs,
score_sequence, tokenize, end.
"""

from __future__ import annotations

import json
import math
import socket
import sys
from typing import Iterable

from .backends import BackendError


class ProtocolState:
    def __init__(self, backend):
        self.backend = backend
        self.sessions: dict[str, object] = {}
        self._next_session = 0

    def _require(self, req: dict, field: str, kind) -> object:
        value = req.get(field)
        if not isinstance(value, kind):
            raise BackendError(f'field "{field}" missing or wrong type')
        return value

    def _token_list(self, req: dict, field: str) -> list[str]:
        value = self._require(req, field, list)
        if not all(isinstance(t, str) for t in value):
            raise BackendError(f'field "{field}" must be a list of strings')
        return value

    def handle(self, line: str) -> str:
        rid = None
        try:
            req = json.loads(line)
            if not isinstance(req, dict):
                raise json.JSONDecodeError("not an object", line, 0)
        except json.JSONDecodeError as e:
            return json.dumps({"rid": None, "ok": False,
                               "error": f"parse error: {e.msg}"})
        rid = req.get("rid")
        try:
            return json.dumps({"rid": rid, "ok": True, **self._dispatch(req)},
                              ensure_ascii=False)
        except BackendError as e:
            return json.dumps({"rid": rid, "ok": False, "error": str(e)},
                              ensure_ascii=False)
        except Exception as e:  # stay alive on any per-request failure
            return json.dumps({"rid": rid, "ok": False,
                               "error": f"{type(e).__name__}: {e}"},
                              ensure_ascii=False)

    def _dispatch(self, req: dict) -> dict:
        op = req.get("op")
        if op == "start":
            encoder_input = self._require(req, "encoder_input", str)
            self._next_session += 1
            name = f"s{self._next_session}"
            self.sessions[name] = self.backend.start_session(encoder_input)
            return {"session": name}
        if op == "next_logprobs":
            name = self._require(req, "session", str)
            if name not in self.sessions:
                raise BackendError(f"unknown session {name!r}")
            history = self._token_list(req, "history")
            candidates = self._token_list(req, "candidates")
            values = self.backend.next_logprobs(self.sessions[name], history, candidates)
            return {"logprobs": [self._finite(v) for v in values]}
        if op == "score_sequence":
            encoder_input = self._require(req, "encoder_input", str)
            target = self._token_list(req, "target")
            return {"logprob": self._finite(
                self.backend.score_sequence(encoder_input, target))}
        if op == "tokenize":
            word = self._require(req, "word", str)
            tokens = self.backend.tokenize(word)
            if not tokens:
                raise BackendError(f"tokenizer produced no tokens for {word!r}")
            return {"tokens": tokens}
        if op == "end":
            name = self._require(req, "session", str)
            self.sessions.pop(name, None)
            return {}
        raise BackendError(f"unknown op {op!r}")

    @staticmethod
    def _finite(value: float) -> float:
        value = float(value)
        if not math.isfinite(value):
            # wire numbers must be finite 64-bit floats
            return -1e30 if value < 0 else 1e30
        return value


def serve_lines(backend, lines: Iterable[str], write) -> None:
    state = ProtocolState(backend)
    for line in lines:
        if not line.strip():
            continue
        write(state.handle(line) + "\n")


def serve_stdio(backend) -> None:
    out = sys.stdout
    state = ProtocolState(backend)
    for line in sys.stdin:
        if not line.strip():
            continue
        out.write(state.handle(line) + "\n")
        out.flush()


def serve_tcp(backend, host: str, port: int) -> None:
    """Single-threaded loop; connections are served one after another."""
    server = socket.socket()
    server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    server.bind((host, port))
    server.listen(1)
    print(f"pyscorer listening on {host}:{server.getsockname()[1]}",
          file=sys.stderr, flush=True)
    while True:
        conn, _ = server.accept()
        fh = conn.makefile("rw", encoding="utf-8", newline="\n")
        state = ProtocolState(backend)
        for line in fh:
            if not line.strip():
                continue
            fh.write(state.handle(line) + "\n")
            fh.flush()
        conn.close()
