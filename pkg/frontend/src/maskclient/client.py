"""Session setup and masked greedy decoding against the mask sidecar.

The client pre-tokenizes everything (input sentence, category phrases,
polarity words) into ids from its vocabulary, initializes a server session
over the newline-delimited JSON protocol, and then drives a step-wise
generation loop: fetch the admissible set for the current prefix, set every
other id's score to -inf, take the argmax (ties toward the lowest id), and
append until eos or the length budget.
"""

from __future__ import annotations

import json
import socket
import subprocess
from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol, Sequence

from .vocab import CLOSE, EOS, MARKER_LETTERS, OPEN, SEP, ClientVocab, whitespace_tokenize

TASK_MARKERS: Mapping[str, tuple[str, ...]] = {
    "ate": ("A",),
    "acd": ("C",),
    "acsa": ("C", "P"),
    "e2e": ("A", "P"),
    "acte": ("A", "C"),
    "tasd": ("A", "C", "P"),
}


class ProtocolError(RuntimeError):
    """The server answered with an error, or the transport broke."""

    def __init__(self, code: str, detail: str = "") -> None:
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code
        self.detail = detail


class Transport(Protocol):
    def request(self, message: dict) -> dict: ...
    def close(self) -> None: ...


class TcpTransport:
    def __init__(self, host: str, port: int, timeout: float = 30.0) -> None:
        self._socket = socket.create_connection((host, port), timeout=timeout)
        self._stream = self._socket.makefile("rw", encoding="utf-8")

    def request(self, message: dict) -> dict:
        self._stream.write(json.dumps(message) + "\n")
        self._stream.flush()
        line = self._stream.readline()
        if not line:
            raise ProtocolError("connection_closed", "server closed the connection")
        return json.loads(line)

    def close(self) -> None:
        self._stream.close()
        self._socket.close()


class StdioTransport:
    """Talks to a server subprocess over its standard streams."""

    def __init__(self, argv: Sequence[str]) -> None:
        self._process = subprocess.Popen(
            list(argv), stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True
        )

    def request(self, message: dict) -> dict:
        assert self._process.stdin and self._process.stdout
        self._process.stdin.write(json.dumps(message) + "\n")
        self._process.stdin.flush()
        line = self._process.stdout.readline()
        if not line:
            raise ProtocolError("connection_closed", "server process produced no response")
        return json.loads(line)

    def close(self) -> None:
        if self._process.stdin:
            self._process.stdin.close()
        self._process.terminate()
        self._process.wait(timeout=10)


@dataclass
class BridgeConfig:
    """What the client needs to set up one constrained-generation session."""

    vocab_path: str
    task: str
    categories: tuple[str, ...] = ()
    polarity_words: tuple[str, ...] = ("great", "ok", "bad")
    implicit_word: str = "it"
    mode: str = "bag"
    allow_empty: bool = False
    max_len: int = 256
    host: str = "127.0.0.1"
    port: int | None = None
    command: tuple[str, ...] = field(default_factory=tuple)

    def markers(self) -> tuple[str, ...]:
        try:
            return TASK_MARKERS[self.task.lower()]
        except KeyError:
            raise ValueError(f"unknown task {self.task!r}") from None

    def connect(self) -> Transport:
        if self.port is not None:
            return TcpTransport(self.host, self.port)
        if self.command:
            return StdioTransport(self.command)
        raise ValueError("config needs either a TCP port or a server command")


def category_phrase_words(label: str) -> list[str]:
    """``FOOD#QUALITY`` -> ["food", "quality"]; already-phrased input passes through."""
    return label.lower().replace("#", " ").split()


def _ngrams(ids: Sequence[int]) -> list[tuple[int, ...]]:
    grams = {
        tuple(ids[start:end])
        for start in range(len(ids))
        for end in range(start + 1, len(ids) + 1)
    }
    return sorted(grams)


def prepare_session(
    sentence_text: str, config: BridgeConfig, vocab: ClientVocab, session_id: str
) -> dict:
    """Build the init message: candidate ids resolved entirely client-side."""
    specials = vocab.special_ids()
    special_ids = set(specials.values())
    markers = config.markers()

    input_ids = [
        i for i in vocab.ids(whitespace_tokenize(sentence_text)) if i not in special_ids
    ]
    implicit_id = vocab.id(config.implicit_word)
    category_word_ids = [
        vocab.ids(category_phrase_words(label)) for label in sorted(config.categories)
    ]
    polarity_ids = vocab.ids(config.polarity_words)

    message: dict = {
        "type": "init",
        "session": session_id,
        "markers": list(markers),
        "special": {
            "open": specials[OPEN],
            "close": specials[CLOSE],
            "sep": specials[SEP],
            "eos": specials[EOS],
            "letters": {m: specials[m] for m in MARKER_LETTERS},
        },
        "mode": config.mode,
        "allow_empty": config.allow_empty,
        "max_len": config.max_len,
    }
    if config.mode == "bag":
        content = {
            "A": sorted(set(input_ids) | {implicit_id}),
            "C": sorted({i for ids in category_word_ids for i in ids}),
            "P": sorted(set(polarity_ids)),
        }
        message["content"] = {m: content[m] for m in markers}
    else:
        phrases = {
            "A": [list(p) for p in sorted(set(_ngrams(input_ids)) | {(implicit_id,)})],
            "C": [list(ids) for ids in category_word_ids],
            "P": [[i] for i in polarity_ids],
        }
        message["phrases"] = {m: phrases[m] for m in markers}
    return message


class BridgeSession:
    """One initialized server session plus the transport it lives on.

    ``open`` dials a fresh connection and owns it; ``attach`` initializes a
    session on a shared transport and leaves the connection open on close.
    """

    def __init__(
        self,
        transport: Transport,
        session_id: str,
        eos_id: int,
        max_len: int,
        owns_transport: bool = True,
    ) -> None:
        self.transport = transport
        self.session_id = session_id
        self.eos_id = eos_id
        self.max_len = max_len
        self.owns_transport = owns_transport

    @classmethod
    def open(
        cls, sentence_text: str, config: BridgeConfig, vocab: ClientVocab, session_id: str
    ) -> "BridgeSession":
        transport = config.connect()
        try:
            return cls.attach(transport, sentence_text, config, vocab, session_id, owns=True)
        except Exception:
            transport.close()
            raise

    @classmethod
    def attach(
        cls,
        transport: Transport,
        sentence_text: str,
        config: BridgeConfig,
        vocab: ClientVocab,
        session_id: str,
        owns: bool = False,
    ) -> "BridgeSession":
        message = prepare_session(sentence_text, config, vocab, session_id)
        response = transport.request(message)
        if response.get("type") != "ack":
            raise ProtocolError(response.get("code", "bad_response"), response.get("detail", ""))
        return cls(transport, session_id, vocab.id(EOS), config.max_len, owns_transport=owns)

    def mask(self, prefix: Sequence[int]) -> tuple[list[int], bool]:
        response = self.transport.request(
            {"type": "mask", "session": self.session_id, "prefix": list(prefix)}
        )
        if response.get("type") != "allowed":
            raise ProtocolError(response.get("code", "bad_response"), response.get("detail", ""))
        return response["tokens"], response["terminal"]

    def close(self) -> None:
        try:
            self.transport.request({"type": "close", "session": self.session_id})
        finally:
            if self.owns_transport:
                self.transport.close()

    def __enter__(self) -> "BridgeSession":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


Scorer = Callable[[Sequence[int], Sequence[int]], Sequence[float]]


def masked_greedy_loop(
    scorer: Scorer, input_ids: Sequence[int], session: BridgeSession
) -> list[int]:
    """Greedy decoding with server-supplied masks applied as -inf."""
    out: list[int] = []
    while len(out) < session.max_len:
        allowed, _ = session.mask(out)
        if not allowed:
            raise ProtocolError("empty_mask", "server returned no admissible tokens")
        scores = scorer(input_ids, out)
        masked = [
            scores[i] if i in set(allowed) else float("-inf") for i in range(len(scores))
        ]
        best = max(range(len(masked)), key=lambda i: (masked[i], -i))
        out.append(best)
        if best == session.eos_id:
            break
    return out
