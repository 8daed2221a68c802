"""Exception types shared across the toolkit."""


class LatrecError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(LatrecError):
    """A value or configuration violates a documented invariant."""


class CycleError(LatrecError):
    """The graph contains a cycle where a DAG is required."""


class NoHypothesisError(LatrecError):
    """A search terminated without producing any complete hypothesis."""


class SegmentationError(LatrecError):
    """A token sequence cannot be assembled into whole words."""


class TokenizerError(LatrecError):
    """A word tokenizer returned an unusable split."""


class EmptyReferenceError(LatrecError):
    """WER is undefined for an empty reference."""


class ParseError(LatrecError):
    """An input file is malformed.

    Carries the source name and 1-based line number when known.
    """

    def __init__(self, reason: str, source: str | None = None, line: int | None = None):
        self.reason = reason
        self.source = source
        self.line = line
        loc = ""
        if source is not None:
            loc = f"{source}:"
        if line is not None:
            loc += f"{line}:"
        super().__init__(f"{loc} {reason}" if loc else reason)


class ScorerError(LatrecError):
    """Base class for external-scorer failures."""


class ProtocolError(ScorerError):
    """The remote scorer sent a malformed or out-of-order response."""


class TransportError(ScorerError):
    """The connection or pipe to the remote scorer broke."""


class RemoteError(ScorerError):
    """The remote scorer reported a failure for a request."""
