"""Core domain types: sentiment tuples, tasks, sentences, and the label catalog.

Everything here is an immutable value object; constructors validate the
invariants and instances are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping


class ModelError(ValueError):
    """Raised when a domain value violates one of its invariants."""


class Polarity(Enum):
    POSITIVE = "positive"
    NEUTRAL = "neutral"
    NEGATIVE = "negative"

    def __repr__(self) -> str:
        return f"Polarity.{self.name}"


class Split(Enum):
    TRAIN = "train"
    DEV = "dev"
    TEST = "test"


# Marker letters in their fixed priority order: aspect term, category, polarity.
MARKER_A = "A"
MARKER_C = "C"
MARKER_P = "P"
ALL_MARKERS: tuple[str, ...] = (MARKER_A, MARKER_C, MARKER_P)


class Task(Enum):
    """The six tasks, each predicting a fixed subset of tuple elements."""

    ATE = "ate"
    ACD = "acd"
    ACSA = "acsa"
    E2E = "e2e"
    ACTE = "acte"
    TASD = "tasd"

    @property
    def marker_order(self) -> tuple[str, ...]:
        return _TASK_MARKERS[self]


_TASK_MARKERS: dict[Task, tuple[str, ...]] = {
    Task.ATE: (MARKER_A,),
    Task.ACD: (MARKER_C,),
    Task.ACSA: (MARKER_C, MARKER_P),
    Task.E2E: (MARKER_A, MARKER_P),
    Task.ACTE: (MARKER_A, MARKER_C),
    Task.TASD: (MARKER_A, MARKER_C, MARKER_P),
}


def _validate_category_part(part: str, what: str) -> None:
    if not part:
        raise ModelError(f"category {what} must be non-empty")
    if "#" in part:
        raise ModelError(f"category {what} must not contain '#': {part!r}")
    if any(ch.isspace() for ch in part):
        raise ModelError(f"category {what} must not contain whitespace: {part!r}")


@dataclass(frozen=True)
class Category:
    """A closed-set ``ENTITY#ATTRIBUTE`` label, e.g. ``FOOD#QUALITY``.

    Both parts are uppercased on construction; the attribute may contain
    underscores (``STYLE_OPTIONS``) but neither part may be empty or contain
    whitespace or ``#``.
    """

    entity: str
    attribute: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "entity", self.entity.upper())
        object.__setattr__(self, "attribute", self.attribute.upper())
        _validate_category_part(self.entity, "entity")
        _validate_category_part(self.attribute, "attribute")

    @classmethod
    def parse(cls, label: str) -> Category:
        """Parse the canonical ``ENTITY#ATTRIBUTE`` rendering."""
        if label.count("#") != 1:
            raise ModelError(f"category label needs exactly one '#': {label!r}")
        entity, attribute = label.split("#")
        return cls(entity, attribute)

    def render(self) -> str:
        return f"{self.entity}#{self.attribute}"

    def __str__(self) -> str:
        return self.render()


@dataclass(frozen=True)
class RawCategory:
    """A category phrase from lenient parsing that maps to no well-formed label.

    Generated output is not guaranteed to name a two-word category; whatever
    phrase appeared is retained verbatim (uppercased, single-spaced) so it
    still counts as a prediction under exact-match scoring. The rendering
    never contains ``#``, so a raw category never compares equal to any
    :class:`Category`.
    """

    text: str

    def __post_init__(self) -> None:
        normalized = " ".join(self.text.split()).upper()
        if not normalized:
            raise ModelError("raw category text must be non-empty")
        object.__setattr__(self, "text", normalized)

    def render(self) -> str:
        return self.text

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class AspectTerm:
    """An opinion target: an explicit surface span or the implicit marker.

    ``text is None`` means implicit. Spans are optional metadata and are
    excluded from equality and hashing; the generative pipeline predicts
    strings, not offsets.
    """

    text: str | None
    span: tuple[int, int] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.text is not None and not self.text:
            raise ModelError("explicit aspect term must be a non-empty string")
        if self.span is not None:
            if self.text is None:
                raise ModelError("implicit aspect term cannot carry a span")
            start, end = self.span
            if not (0 <= start < end):
                raise ModelError(f"aspect span must satisfy 0 <= from < to: {self.span}")

    @classmethod
    def explicit(cls, text: str, span: tuple[int, int] | None = None) -> AspectTerm:
        return cls(text=text, span=span)

    @classmethod
    def implicit(cls) -> AspectTerm:
        return cls(text=None)

    @property
    def is_implicit(self) -> bool:
        return self.text is None


@dataclass(frozen=True)
class SentimentTuple:
    """One (aspect term, category, polarity) annotation.

    Equality is element-wise; aspect spans never participate.
    """

    aspect: AspectTerm
    category: Category | RawCategory
    polarity: Polarity


@dataclass(frozen=True)
class Sentence:
    id: str
    language: str
    text: str
    tuples: tuple[SentimentTuple, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "tuples", tuple(self.tuples))
        for t in self.tuples:
            span = t.aspect.span
            if span is not None and span[1] > len(self.text):
                raise ModelError(
                    f"aspect span {span} exceeds sentence {self.id!r} of length {len(self.text)}"
                )


@dataclass(frozen=True)
class Corpus:
    sentences: tuple[Sentence, ...]
    split: Split
    language: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "sentences", tuple(self.sentences))
        seen: set[str] = set()
        for s in self.sentences:
            if s.id in seen:
                raise ModelError(f"duplicate sentence id in corpus: {s.id!r}")
            seen.add(s.id)

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)


# The polarity wording every module shares: positive reads as an approving
# word, neutral as an indifferent one, negative as a disapproving one.
DEFAULT_POLARITY_WORDS: Mapping[Polarity, str] = {
    Polarity.POSITIVE: "great",
    Polarity.NEUTRAL: "ok",
    Polarity.NEGATIVE: "bad",
}

# The 12 restaurant-domain categories observed in the ingested datasets.
DEFAULT_CATEGORIES: frozenset[Category] = frozenset(
    Category.parse(label)
    for label in (
        "AMBIENCE#GENERAL",
        "DRINKS#PRICES",
        "DRINKS#QUALITY",
        "DRINKS#STYLE_OPTIONS",
        "FOOD#PRICES",
        "FOOD#QUALITY",
        "FOOD#STYLE_OPTIONS",
        "LOCATION#GENERAL",
        "RESTAURANT#GENERAL",
        "RESTAURANT#MISCELLANEOUS",
        "RESTAURANT#PRICES",
        "SERVICE#GENERAL",
    )
)


@dataclass(frozen=True)
class LabelCatalog:
    """Closed label inventory: category set plus the polarity-word bijection."""

    categories: frozenset[Category] = DEFAULT_CATEGORIES
    polarity_words: Mapping[Polarity, str] = field(default_factory=lambda: dict(DEFAULT_POLARITY_WORDS))
    implicit_word: str = "it"

    def __post_init__(self) -> None:
        object.__setattr__(self, "categories", frozenset(self.categories))
        words = dict(self.polarity_words)
        if set(words) != set(Polarity):
            raise ModelError("polarity_words must cover exactly the three polarities")
        if len(set(words.values())) != len(words):
            raise ModelError("polarity_words must be invertible (distinct words)")
        object.__setattr__(self, "polarity_words", words)
        if not self.implicit_word:
            raise ModelError("implicit_word must be non-empty")

    @property
    def word_to_polarity(self) -> dict[str, Polarity]:
        return {word: pol for pol, word in self.polarity_words.items()}

    @classmethod
    def from_corpus(cls, *corpora: Iterable[Sentence]) -> LabelCatalog:
        """Rebuild the catalog from observed gold categories."""
        categories: set[Category] = set()
        for corpus in corpora:
            for sentence in corpus:
                for t in sentence.tuples:
                    if isinstance(t.category, Category):
                        categories.add(t.category)
        if not categories:
            raise ModelError("cannot build a catalog from corpora without categories")
        return cls(categories=frozenset(categories))
