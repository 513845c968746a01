"""Reference client for the token-mask sidecar protocol."""

from .client import (
    BridgeConfig,
    BridgeSession,
    ProtocolError,
    StdioTransport,
    TcpTransport,
    masked_greedy_loop,
    prepare_session,
)
from .vocab import ClientVocab, UnresolvableToken, whitespace_tokenize

__version__ = "0.1.0"

__all__ = [
    "BridgeConfig",
    "BridgeSession",
    "ClientVocab",
    "ProtocolError",
    "StdioTransport",
    "TcpTransport",
    "UnresolvableToken",
    "masked_greedy_loop",
    "prepare_session",
    "whitespace_tokenize",
]
