"""Scoring backends.

A backend turns an encoder input (the concatenated N-best text) into
per-step token log-probabilities. ConsensusBackend is a self-contained
deterministic voter over the hypotheses in the encoder input itself;
HfSeq2SeqBackend runs a pre-trained encoder-decoder language model via
transformers and is only importable when that stack is installed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

MARKER = "▁"
DEFAULT_PREFIX = "text correction:"
DEFAULT_SEPARATOR = "</s>"
TERMINAL = "</s>"


class BackendError(Exception):
    pass


@dataclass
class ConsensusSession:
    token_rows: list[list[str]]
    vocab_size: int
    votes: list[dict[str, int]]  # per position, token -> count


class ConsensusBackend:
    """Position-wise voting over the N-best hypotheses in the encoder input.

    Each hypothesis is tokenized into marker-prefixed whole words; the
    log-probability of a token at step t is its smoothed vote share among
    the hypotheses' tokens at position t. The terminal token collects the
    votes of hypotheses that end at t. Scores depend only on (step, token),
    so summed step scores equal the whole-sequence score exactly.
    """

    name = "consensus"

    def __init__(self, prefix: str = DEFAULT_PREFIX,
                 separator: str = DEFAULT_SEPARATOR, alpha: float = 0.1):
        if alpha <= 0:
            raise BackendError(f"alpha must be positive, got {alpha}")
        self.prefix = prefix
        self.separator = separator
        self.alpha = alpha

    def tokenize(self, word: str) -> list[str]:
        return [MARKER + word]

    def _hypotheses(self, encoder_input: str) -> list[list[str]]:
        text = encoder_input
        if self.prefix and text.startswith(self.prefix):
            text = text[len(self.prefix):]
        rows = []
        for part in text.split(self.separator):
            words = part.split()
            if words:
                rows.append([MARKER + w for w in words])
        return rows

    def start_session(self, encoder_input: str) -> ConsensusSession:
        rows = self._hypotheses(encoder_input)
        if not rows:
            raise BackendError("encoder input contains no hypotheses")
        max_len = max(len(r) for r in rows)
        votes: list[dict[str, int]] = []
        for t in range(max_len + 1):
            tally: dict[str, int] = {}
            for row in rows:
                tok = row[t] if t < len(row) else (TERMINAL if t == len(row) else None)
                if tok is not None:
                    tally[tok] = tally.get(tok, 0) + 1
            votes.append(tally)
        vocab = {tok for row in rows for tok in row}
        vocab.add(TERMINAL)
        return ConsensusSession(rows, len(vocab), votes)

    def _logprob(self, session: ConsensusSession, step: int, token: str) -> float:
        tally = session.votes[step] if step < len(session.votes) else {}
        denom = sum(tally.values()) + self.alpha * (session.vocab_size + 1)
        return math.log((tally.get(token, 0) + self.alpha) / denom)

    def next_logprobs(self, session: ConsensusSession, history: Sequence[str],
                      candidates: Sequence[str]) -> list[float]:
        step = len(history)
        return [self._logprob(session, step, c) for c in candidates]

    def score_sequence(self, encoder_input: str, target: Sequence[str]) -> float:
        session = self.start_session(encoder_input)
        return sum(self._logprob(session, t, tok) for t, tok in enumerate(target))


class HfSeq2SeqBackend:
    """Pre-trained encoder-decoder LM behind the same backend interface.

    Inference is deterministic: eval mode, no sampling, no dropout. One
    encoder forward runs per session and is reused for every step query.
    """

    name = "hf"

    def __init__(self, model_name: str, device: str = "cpu"):
        try:
            import torch
            from transformers import AutoModelForSeq2SeqLM, AutoTokenizer
        except ImportError as e:
            raise BackendError(f"transformers/torch not available: {e}") from None
        self._torch = torch
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(model_name)
            self.model = AutoModelForSeq2SeqLM.from_pretrained(model_name)
        except Exception as e:
            raise BackendError(f"cannot load model {model_name!r}: {e}") from None
        self.model.eval()
        self.model.to(device)
        self.device = device

    def tokenize(self, word: str) -> list[str]:
        pieces = self.tokenizer.tokenize(word)
        return pieces if pieces else [MARKER + word]

    def start_session(self, encoder_input: str):
        torch = self._torch
        enc = self.tokenizer(encoder_input, return_tensors="pt").to(self.device)
        with torch.no_grad():
            encoder_outputs = self.model.get_encoder()(**enc)
        return {"encoder_outputs": encoder_outputs,
                "attention_mask": enc["attention_mask"]}

    def _decoder_ids(self, history: Sequence[str]):
        torch = self._torch
        start_id = self.model.config.decoder_start_token_id
        ids = [start_id] + self.tokenizer.convert_tokens_to_ids(list(history))
        return torch.tensor([ids], device=self.device)

    def next_logprobs(self, session, history: Sequence[str],
                      candidates: Sequence[str]) -> list[float]:
        torch = self._torch
        with torch.no_grad():
            out = self.model(
                encoder_outputs=session["encoder_outputs"],
                attention_mask=session["attention_mask"],
                decoder_input_ids=self._decoder_ids(history))
            logprobs = torch.log_softmax(out.logits[0, -1].double(), dim=-1)
        cand_ids = self.tokenizer.convert_tokens_to_ids(list(candidates))
        return [float(logprobs[i]) for i in cand_ids]

    def score_sequence(self, encoder_input: str, target: Sequence[str]) -> float:
        session = self.start_session(encoder_input)
        total = 0.0
        for t, tok in enumerate(target):
            total += self.next_logprobs(session, target[:t], [tok])[0]
        return total


def make_backend(spec: str, prefix: str = DEFAULT_PREFIX,
                 separator: str = DEFAULT_SEPARATOR, alpha: float = 0.1,
                 device: str = "cpu"):
    if spec == "consensus":
        return ConsensusBackend(prefix=prefix, separator=separator, alpha=alpha)
    if spec.startswith("hf:"):
        name = spec[len("hf:"):]
        if not name:
            raise BackendError("hf backend needs a model name, e.g. hf:t5-small")
        return HfSeq2SeqBackend(name, device=device)
    raise BackendError(f"unknown backend {spec!r}; use consensus or hf:MODEL")
