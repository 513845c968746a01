"""Vocabulary resolution for the mask-sidecar client.

The client owns tokenization: the server only ever sees integer ids. The
reference tokenizer splits on whitespace with ``[`` and ``]`` forced into
their own tokens, matching the DSL's three-token markers. A vocabulary file
is one token per line; the id is the line index.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

OPEN = "["
CLOSE = "]"
SEP = ";"
EOS = "<eos>"
MARKER_LETTERS = ("A", "C", "P")
SPECIAL_TOKEN_STRINGS = (OPEN, CLOSE, SEP, EOS, *MARKER_LETTERS)


class UnresolvableToken(KeyError):
    """A required symbol is missing from the vocabulary."""

    def __init__(self, token: str) -> None:
        super().__init__(token)
        self.token = token

    def __str__(self) -> str:
        return f"token {self.token!r} is not in the vocabulary"


def whitespace_tokenize(text: str) -> list[str]:
    out: list[str] = []
    for piece in text.split():
        buf = ""
        for ch in piece:
            if ch in "[]":
                if buf:
                    out.append(buf)
                    buf = ""
                out.append(ch)
            else:
                buf += ch
        if buf:
            out.append(buf)
    return out


class ClientVocab:
    """Token string <-> id table backed by a one-token-per-line file."""

    def __init__(self, tokens: Sequence[str]) -> None:
        self.tokens = list(tokens)
        self._index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self._index) != len(self.tokens):
            raise ValueError("vocabulary contains duplicate tokens")

    @classmethod
    def from_file(cls, path: str | Path) -> ClientVocab:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(lines)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def id(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise UnresolvableToken(token) from None

    def ids(self, tokens: Iterable[str]) -> list[int]:
        return [self.id(t) for t in tokens]

    def encode(self, text: str) -> list[int]:
        return self.ids(whitespace_tokenize(text))

    def token(self, token_id: int) -> str:
        return self.tokens[token_id]

    def decode(self, ids: Iterable[int], drop_eos: bool = True) -> str:
        out = ""
        for token_id in ids:
            token = self.tokens[token_id]
            if drop_eos and token == EOS:
                continue
            if out and token != CLOSE and not out.endswith(OPEN):
                out += " "
            out += token
        return out

    def special_ids(self) -> dict[str, int]:
        """Resolve the structural tokens; raises if any is missing."""
        return {name: self.id(name) for name in SPECIAL_TOKEN_STRINGS}
