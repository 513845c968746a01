"""Reference whitespace tokenizer, id vocabulary, and session construction.

The automaton in :mod:`absakit.constrain` only sees integer ids; this module
supplies the concrete tokenization used by the test suite, the CLI, and the
mock decoding pipeline. Brackets are always their own tokens, so the marker
``[A]`` tokenizes to ``[``, ``A``, ``]`` and the separator ``[;]`` to ``[``,
``;``, ``]``; everything else splits on whitespace.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import constrain
from .grammar import category_phrase
from .model import LabelCatalog, Task

OPEN = "["
CLOSE = "]"
SEP = ";"
EOS = "<eos>"

SPECIAL_TOKEN_STRINGS: tuple[str, ...] = (OPEN, CLOSE, SEP, EOS, "A", "C", "P")


def tokenize(text: str) -> list[str]:
    """Whitespace-split, with ``[`` and ``]`` forced into their own tokens."""
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


def detokenize(tokens: Iterable[str]) -> str:
    """Inverse of :func:`tokenize` on marker text: no space inside brackets."""
    out = ""
    for token in tokens:
        if out and token != CLOSE and not out.endswith(OPEN):
            out += " "
        out += token
    return out


@dataclass
class Vocab:
    """Token string <-> integer id table; id equals insertion index."""

    tokens: list[str] = field(default_factory=lambda: list(SPECIAL_TOKEN_STRINGS))
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self._index) != len(self.tokens):
            raise ValueError("vocabulary contains duplicate tokens")

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def id(self, token: str) -> int:
        return self._index[token]

    def token(self, token_id: int) -> str:
        return self.tokens[token_id]

    def ensure(self, token: str) -> int:
        if token not in self._index:
            self._index[token] = len(self.tokens)
            self.tokens.append(token)
        return self._index[token]

    def ensure_all(self, tokens: Iterable[str]) -> list[int]:
        return [self.ensure(t) for t in tokens]

    def encode(self, text: str) -> list[int]:
        return [self._index[t] for t in tokenize(text)]

    def decode(self, ids: Sequence[int], drop_eos: bool = True) -> str:
        tokens = [self.tokens[i] for i in ids]
        if drop_eos:
            tokens = [t for t in tokens if t != EOS]
        return detokenize(tokens)

    def special_tokens(self) -> constrain.SpecialTokens:
        return constrain.SpecialTokens(
            open=self.id(OPEN),
            close=self.id(CLOSE),
            sep=self.id(SEP),
            eos=self.id(EOS),
            letters={m: self.id(m) for m in ("A", "C", "P")},
        )


def _ngrams(ids: Sequence[int]) -> set[tuple[int, ...]]:
    grams: set[tuple[int, ...]] = set()
    for start in range(len(ids)):
        for end in range(start + 1, len(ids) + 1):
            grams.add(tuple(ids[start:end]))
    return grams


def build_session(
    sentence_text: str,
    task: Task,
    catalog: LabelCatalog,
    vocab: Vocab | None = None,
    mode: str = constrain.BAG,
    allow_empty: bool = False,
    max_len: int = 256,
) -> tuple[constrain.ConstraintSession, Vocab]:
    """Construct a constraint session for one input sentence and task.

    Aspect-term content is the input sentence's tokens plus the implicit word;
    category content comes from the catalog's phrases; polarity content from
    the polarity words. Input words that collide with a special token (a bare
    ``[``, ``]`` or ``;`` in the review) are excluded, since the automaton
    reserves those ids for structure. The vocabulary is grown in place.
    """
    vocab = vocab if vocab is not None else Vocab()
    specials = vocab.special_tokens()
    special_ids = specials.all_ids()

    input_ids = [i for i in vocab.ensure_all(tokenize(sentence_text)) if i not in special_ids]
    implicit_id = vocab.ensure(catalog.implicit_word)

    category_phrases = sorted(category_phrase(c) for c in catalog.categories)
    category_word_ids = [vocab.ensure_all(p.split()) for p in category_phrases]
    polarity_ids = [
        vocab.ensure(catalog.polarity_words[p]) for p in sorted(catalog.polarity_words, key=lambda p: p.value)
    ]

    if mode == constrain.BAG:
        content = {
            "A": frozenset(input_ids) | {implicit_id},
            "C": frozenset(i for ids in category_word_ids for i in ids),
            "P": frozenset(polarity_ids),
        }
        candidates = constrain.CandidateSets(
            mode=mode, content={m: content[m] for m in task.marker_order}
        )
    else:
        phrases = {
            "A": tuple(sorted(_ngrams(input_ids) | {(implicit_id,)})),
            "C": tuple(tuple(ids) for ids in category_word_ids),
            "P": tuple((i,) for i in polarity_ids),
        }
        candidates = constrain.CandidateSets(
            mode=mode, phrases={m: phrases[m] for m in task.marker_order}
        )

    session = constrain.ConstraintSession(
        marker_order=task.marker_order,
        specials=specials,
        candidates=candidates,
        allow_empty=allow_empty,
        max_len=max_len,
    )
    return session, vocab
