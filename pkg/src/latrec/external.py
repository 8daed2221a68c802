"""Client for external scorer processes.

The wire protocol is newline-delimited JSON over the stdio of a child
process or a TCP stream. Every request carries an integer "rid" that the
server echoes back; responses are single lines. Supported ops: start,
next_logprobs, score_sequence, tokenize, end.
"""

from __future__ import annotations

import json
import math
import re
import shlex
import socket
import subprocess
from typing import Any, Iterable, Sequence

from .core import Token
from .errors import ProtocolError, RemoteError, TransportError, ValidationError
from .scoring import EncoderInput, Scorer


class StdioTransport:
    """Child process speaking the protocol on its stdin/stdout."""

    def __init__(self, command: Sequence[str]):
        try:
            self._proc = subprocess.Popen(
                list(command), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, encoding="utf-8", bufsize=1)
        except OSError as e:
            raise TransportError(f"cannot spawn scorer process: {e}") from None

    def round_trip(self, line: str) -> str:
        proc = self._proc
        if proc.poll() is not None:
            raise TransportError("scorer process has exited")
        try:
            proc.stdin.write(line + "\n")
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise TransportError(f"broken pipe to scorer process: {e}") from None
        reply = proc.stdout.readline()
        if reply == "":
            raise TransportError("scorer process closed its output")
        return reply.rstrip("\n")

    def close(self) -> None:
        proc = self._proc
        try:
            if proc.stdin:
                proc.stdin.close()
            proc.terminate()
            proc.wait(timeout=5)
        except Exception:
            proc.kill()


class TcpTransport:
    def __init__(self, host: str, port: int):
        try:
            self._sock = socket.create_connection((host, port))
        except OSError as e:
            raise TransportError(f"cannot connect to {host}:{port}: {e}") from None
        self._file = self._sock.makefile("rw", encoding="utf-8", newline="\n")

    def round_trip(self, line: str) -> str:
        try:
            self._file.write(line + "\n")
            self._file.flush()
            reply = self._file.readline()
        except OSError as e:
            raise TransportError(f"connection failed: {e}") from None
        if reply == "":
            raise TransportError("connection closed by scorer")
        return reply.rstrip("\n")

    def close(self) -> None:
        try:
            self._file.close()
            self._sock.close()
        except OSError:
            pass


class ExternalScorer(Scorer):
    """Scorer whose calls round-trip over the wire protocol.

    Identical (history, candidates) queries within one session are
    memoized locally.
    """

    def __init__(self, transport):
        self._transport = transport
        self._rid = 0
        self._cache: dict[tuple, dict[Token, float]] = {}

    def _call(self, op: str, **fields) -> dict:
        self._rid += 1
        rid = self._rid
        request = {"rid": rid, "op": op, **fields}
        reply = self._transport.round_trip(json.dumps(request, ensure_ascii=False))
        try:
            obj = json.loads(reply)
        except json.JSONDecodeError as e:
            raise ProtocolError(f"malformed response: {e.msg}: {reply[:200]!r}") from None
        if not isinstance(obj, dict):
            raise ProtocolError(f"response is not an object: {reply[:200]!r}")
        if obj.get("rid") != rid:
            raise ProtocolError(f"response rid {obj.get('rid')!r} does not match request {rid}")
        if obj.get("ok") is not True:
            if obj.get("ok") is False:
                raise RemoteError(str(obj.get("error", "unspecified remote error")))
            raise ProtocolError(f'response missing "ok" field: {reply[:200]!r}')
        return obj

    @staticmethod
    def _number(value, what: str) -> float:
        if not isinstance(value, (int, float)) or isinstance(value, bool) \
                or not math.isfinite(float(value)):
            raise ProtocolError(f"{what} must be a finite number, got {value!r}")
        return float(value)

    def start(self, enc: EncoderInput) -> str:
        obj = self._call("start", encoder_input=enc.text)
        session = obj.get("session")
        if not isinstance(session, str):
            raise ProtocolError(f"start returned no session: {obj!r}")
        return session

    def next_logprobs(self, session: str, history: Sequence[Token],
                      candidates: Iterable[Token]) -> dict[Token, float]:
        cands = sorted(set(candidates))
        key = (session, tuple(history), tuple(cands))
        hit = self._cache.get(key)
        if hit is not None:
            return dict(hit)
        obj = self._call("next_logprobs", session=session,
                         history=list(history), candidates=cands)
        values = obj.get("logprobs")
        if not isinstance(values, list) or len(values) != len(cands):
            raise ProtocolError(
                f"logprobs must align with candidates ({len(cands)}), got {values!r}")
        result = {c: self._number(v, "logprob") for c, v in zip(cands, values)}
        self._cache[key] = dict(result)
        return result

    def score_sequence(self, enc: EncoderInput, target: Sequence[Token]) -> float:
        obj = self._call("score_sequence", encoder_input=enc.text, target=list(target))
        return self._number(obj.get("logprob"), '"logprob"')

    def tokenize(self, word: str) -> list[Token]:
        obj = self._call("tokenize", word=word)
        tokens = obj.get("tokens")
        if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
            raise ProtocolError(f'"tokens" must be a list of strings, got {tokens!r}')
        return tokens

    def end(self, session: str) -> None:
        try:
            self._call("end", session=session)
        except RemoteError:
            pass  # releasing an unknown session is not fatal
        self._cache = {k: v for k, v in self._cache.items() if k[0] != session}

    def close(self) -> None:
        self._transport.close()

    def __enter__(self) -> "ExternalScorer":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class ExternalWordTokenizer:
    """WordTokenizer view of an external scorer's tokenize op."""

    def __init__(self, scorer: ExternalScorer, convention=None):
        from .retokenize import BoundaryConvention

        self.convention = convention or BoundaryConvention()
        self._scorer = scorer

    def split(self, word: str) -> list[Token]:
        return self._scorer.tokenize(word)


_TCP_SPEC = re.compile(r"^([A-Za-z0-9_.-]+):(\d+)$")


def external_scorer_client(endpoint: str) -> ExternalScorer:
    """Connect to ``host:port`` or spawn ``command args...`` over stdio."""
    m = _TCP_SPEC.match(endpoint.strip())
    if m:
        return ExternalScorer(TcpTransport(m.group(1), int(m.group(2))))
    command = shlex.split(endpoint)
    if not command:
        raise ValidationError("empty external scorer endpoint")
    return ExternalScorer(StdioTransport(command))
