"""Reference external scorer process for the latrec wire protocol."""

__version__ = "0.1.0"

from .backends import ConsensusBackend, HfSeq2SeqBackend, make_backend
from .server import ProtocolState, serve_stdio, serve_tcp

__all__ = ["ConsensusBackend", "HfSeq2SeqBackend", "make_backend",
           "ProtocolState", "serve_stdio", "serve_tcp", "__version__"]
