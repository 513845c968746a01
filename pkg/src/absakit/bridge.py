"""Session-based newline-delimited JSON protocol exposing the token automaton.

External model runtimes pre-tokenize everything on their side and send only
integer ids, which keeps this server tokenizer-agnostic. One JSON object per
line in, one per line out:

    -> {"type":"init","session":S,"markers":[...],"special":{...},"content":{...},
        "mode":"bag"|"trie","phrases":{...}?,"allow_empty":b,"max_len":n}
    <- {"type":"ack","session":S} | {"type":"error","code":C,"detail":D}
    -> {"type":"mask","session":S,"prefix":[...]}
    <- {"type":"allowed","session":S,"tokens":[...],"terminal":b}
    -> {"type":"close","session":S}
    <- {"type":"ack","session":S}
"""

from __future__ import annotations

import json
import socketserver
import threading
from typing import IO, Any

from .constrain import (
    CandidateSets,
    ConstraintSession,
    IllFormedPrefix,
    InvalidSessionConfig,
    SpecialTokens,
    allowed_tokens,
)

DUPLICATE_SESSION = "duplicate_session"
INVALID_CONFIG = "invalid_config"
UNKNOWN_SESSION = "unknown_session"
ILL_FORMED_PREFIX = "ill_formed_prefix"
BAD_MESSAGE = "bad_message"


class SessionRegistry:
    """Thread-safe id -> immutable session map."""

    def __init__(self) -> None:
        self._sessions: dict[str, ConstraintSession] = {}
        self._lock = threading.Lock()

    def register(self, session_id: str, session: ConstraintSession) -> None:
        with self._lock:
            if session_id in self._sessions:
                raise KeyError(session_id)
            self._sessions[session_id] = session

    def get(self, session_id: str) -> ConstraintSession | None:
        with self._lock:
            return self._sessions.get(session_id)

    def close(self, session_id: str) -> bool:
        with self._lock:
            return self._sessions.pop(session_id, None) is not None


def _error(code: str, detail: str) -> dict[str, Any]:
    return {"type": "error", "code": code, "detail": detail}


def session_from_init(msg: dict[str, Any]) -> ConstraintSession:
    special = msg["special"]
    specials = SpecialTokens(
        open=int(special["open"]),
        close=int(special["close"]),
        sep=int(special["sep"]),
        eos=int(special["eos"]),
        letters={str(k): int(v) for k, v in special["letters"].items()},
    )
    mode = msg.get("mode", "bag")
    if mode == "bag":
        candidates = CandidateSets(
            mode=mode,
            content={str(m): frozenset(int(t) for t in ids) for m, ids in msg["content"].items()},
        )
    else:
        candidates = CandidateSets(
            mode=mode,
            phrases={
                str(m): tuple(tuple(int(t) for t in phrase) for phrase in phrases)
                for m, phrases in msg["phrases"].items()
            },
        )
    return ConstraintSession(
        marker_order=tuple(str(m) for m in msg["markers"]),
        specials=specials,
        candidates=candidates,
        allow_empty=bool(msg.get("allow_empty", False)),
        max_len=int(msg.get("max_len", 256)),
    )


class BridgeServer:
    """Protocol state machine; transport-independent."""

    def __init__(self) -> None:
        self.registry = SessionRegistry()

    def handle_message(self, msg: dict[str, Any]) -> dict[str, Any]:
        msg_type = msg.get("type")
        session_id = msg.get("session")
        if not isinstance(session_id, str) or not session_id:
            return _error(BAD_MESSAGE, "missing or non-string 'session'")
        if msg_type == "init":
            return self._handle_init(session_id, msg)
        if msg_type == "mask":
            return self._handle_mask(session_id, msg)
        if msg_type == "close":
            if not self.registry.close(session_id):
                return _error(UNKNOWN_SESSION, session_id)
            return {"type": "ack", "session": session_id}
        return _error(BAD_MESSAGE, f"unknown message type {msg_type!r}")

    def _handle_init(self, session_id: str, msg: dict[str, Any]) -> dict[str, Any]:
        try:
            session = session_from_init(msg)
        except InvalidSessionConfig as exc:
            return _error(INVALID_CONFIG, str(exc))
        except (KeyError, TypeError, ValueError) as exc:
            return _error(INVALID_CONFIG, f"bad init message: {exc!r}")
        try:
            self.registry.register(session_id, session)
        except KeyError:
            return _error(DUPLICATE_SESSION, session_id)
        return {"type": "ack", "session": session_id}

    def _handle_mask(self, session_id: str, msg: dict[str, Any]) -> dict[str, Any]:
        session = self.registry.get(session_id)
        if session is None:
            return _error(UNKNOWN_SESSION, session_id)
        prefix = msg.get("prefix")
        if not isinstance(prefix, list) or not all(isinstance(t, int) for t in prefix):
            return _error(BAD_MESSAGE, "'prefix' must be a list of integer token ids")
        try:
            allowed = allowed_tokens(prefix, session)
        except IllFormedPrefix as exc:
            return _error(ILL_FORMED_PREFIX, str(exc))
        return {
            "type": "allowed",
            "session": session_id,
            "tokens": sorted(allowed),
            "terminal": session.specials.eos in allowed,
        }

    def handle_line(self, line: str) -> str:
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            return json.dumps(_error(BAD_MESSAGE, f"invalid JSON: {exc}"))
        if not isinstance(msg, dict):
            return json.dumps(_error(BAD_MESSAGE, "message must be a JSON object"))
        return json.dumps(self.handle_message(msg))


def serve_stdio(server: BridgeServer, stdin: IO[str], stdout: IO[str]) -> None:
    """Serve one request per input line until EOF."""
    for line in stdin:
        if not line.strip():
            continue
        stdout.write(server.handle_line(line) + "\n")
        stdout.flush()


class _LineHandler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        while True:
            line = self.rfile.readline()
            if not line:
                return
            if not line.strip():
                continue
            response = self.server.bridge.handle_line(line.decode("utf-8"))  # type: ignore[attr-defined]
            self.wfile.write(response.encode("utf-8") + b"\n")


class TcpBridge(socketserver.ThreadingTCPServer):
    """TCP transport; sessions are shared across connections."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], bridge: BridgeServer | None = None) -> None:
        super().__init__(address, _LineHandler)
        self.bridge = bridge if bridge is not None else BridgeServer()


def serve_tcp(host: str, port: int, bridge: BridgeServer | None = None) -> None:
    with TcpBridge((host, port), bridge) as server:
        server.serve_forever()
