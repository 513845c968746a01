"""Bidirectional mapping between sentiment tuples and the bracketed marker DSL.

The textual form renders each tuple as ``[A] phrase [C] phrase [P] phrase``
(restricted to the task's markers) and joins tuples with ``[;]``. Parsing is
lenient: it accepts arbitrary model output, drops fragments that do not form a
complete tuple, and reports every anomaly through :class:`ParseDiagnostics`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .model import (
    MARKER_A,
    MARKER_C,
    MARKER_P,
    AspectTerm,
    Category,
    Corpus,
    LabelCatalog,
    Polarity,
    RawCategory,
    Sentence,
    Task,
)


class UnknownPolarityWord(ValueError):
    """A word that is not in the catalog's polarity bijection."""


class MalformedCategoryPhrase(ValueError):
    """A phrase that cannot be mapped back to an ``ENTITY#ATTRIBUTE`` label."""


@dataclass(frozen=True)
class TaskTuple:
    """A tuple projected onto one task's element subset.

    Elements the task does not predict are ``None``. Equality is element-wise;
    aspect spans are excluded (see :class:`~absakit.model.AspectTerm`).
    """

    aspect: AspectTerm | None = None
    category: Category | RawCategory | None = None
    polarity: Polarity | None = None

    def element(self, marker: str):
        if marker == MARKER_A:
            return self.aspect
        if marker == MARKER_C:
            return self.category
        if marker == MARKER_P:
            return self.polarity
        raise ValueError(f"unknown marker {marker!r}")


@dataclass(frozen=True)
class ExamplePair:
    """One sentence rendered as an input prompt and its target sequence."""

    input_text: str
    target_text: str
    source_sentence_id: str
    task: Task
    language: str

    def __post_init__(self) -> None:
        prompt = marker_prompt(self.task)
        if not self.input_text.endswith(f"| {prompt}"):
            raise ValueError(f"input_text must end with the marker prompt '| {prompt}'")


@dataclass
class ParseDiagnostics:
    dropped_fragments: int = 0
    duplicate_tuples_removed: int = 0
    unknown_polarity_words: int = 0
    noncatalog_categories: int = 0

    def __post_init__(self) -> None:
        for name, value in vars(self).items():
            if value < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def all_zero(self) -> bool:
        return not any(vars(self).values())


def polarity_word(p: Polarity, catalog: LabelCatalog) -> str:
    return catalog.polarity_words[p]


def word_to_polarity(word: str, catalog: LabelCatalog) -> Polarity:
    try:
        return catalog.word_to_polarity[word]
    except KeyError:
        raise UnknownPolarityWord(word) from None


def category_phrase(c: Category) -> str:
    """Render ``FOOD#QUALITY`` as the phrase ``food quality``."""
    return f"{c.entity.lower()} {c.attribute.lower()}"


def phrase_to_category(phrase: str) -> Category:
    """Invert :func:`category_phrase`: first space becomes ``#``, parts uppercased."""
    phrase = phrase.strip()
    if " " not in phrase:
        raise MalformedCategoryPhrase(phrase)
    entity, attribute = phrase.split(" ", 1)
    try:
        return Category(entity, attribute)
    except ValueError as exc:
        raise MalformedCategoryPhrase(phrase) from exc


def _lenient_category(phrase: str, catalog: LabelCatalog) -> Category | RawCategory:
    try:
        return phrase_to_category(phrase)
    except MalformedCategoryPhrase:
        pass
    if " " not in phrase.strip():
        # Accept the canonical ENTITY#ATTRIBUTE form itself as a category.
        try:
            return Category.parse(phrase.strip())
        except ValueError:
            pass
    return RawCategory(phrase)


def aspect_phrase(a: AspectTerm, catalog: LabelCatalog) -> str:
    return catalog.implicit_word if a.is_implicit else a.text  # type: ignore[return-value]


def phrase_to_aspect(phrase: str, catalog: LabelCatalog) -> AspectTerm:
    # The implicit word always maps back to implicit, even when the review
    # happens to contain it verbatim; the surface form is not recoverable.
    if phrase == catalog.implicit_word:
        return AspectTerm.implicit()
    return AspectTerm.explicit(phrase)


def _element_phrase(t: TaskTuple, marker: str, catalog: LabelCatalog) -> str:
    element = t.element(marker)
    if element is None:
        raise ValueError(f"tuple {t} lacks the element for marker [{marker}]")
    if marker == MARKER_A:
        return aspect_phrase(element, catalog)
    if marker == MARKER_C:
        return category_phrase(element) if isinstance(element, Category) else element.text.lower()
    return polarity_word(element, catalog)


def project_tuples(triplets: Iterable, task: Task) -> frozenset[TaskTuple]:
    """Project full triplets onto the task's element subset, as a set."""
    return frozenset(project_tuples_ordered(triplets, task))


def project_tuples_ordered(triplets: Iterable, task: Task) -> tuple[TaskTuple, ...]:
    """Like :func:`project_tuples` but preserves first-occurrence order."""
    markers = task.marker_order
    seen: list[TaskTuple] = []
    for t in triplets:
        projected = TaskTuple(
            aspect=t.aspect if MARKER_A in markers else None,
            category=t.category if MARKER_C in markers else None,
            polarity=t.polarity if MARKER_P in markers else None,
        )
        if projected not in seen:
            seen.append(projected)
    return tuple(seen)


def marker_prompt(task: Task) -> str:
    return " ".join(f"[{m}]" for m in task.marker_order)


def build_input(sentence_text: str, task: Task) -> str:
    return f"{sentence_text} | {marker_prompt(task)}"


def linearize(tuples: Sequence[TaskTuple], task: Task, catalog: LabelCatalog) -> str:
    """Render projected tuples as the marker DSL, joined by ``[;]``."""
    rendered = []
    for t in tuples:
        parts = []
        for marker in task.marker_order:
            parts.append(f"[{marker}]")
            parts.append(_element_phrase(t, marker, catalog))
        rendered.append(" ".join(parts))
    return " [;] ".join(rendered)


_SEPARATOR_RE = re.compile(r"\[\s*;\s*\]")
_MARKER_RE = re.compile(r"\[\s*([ACP])\s*\]")


def _fragment_tuple(
    fragment: str, task: Task, catalog: LabelCatalog, diagnostics: ParseDiagnostics
) -> TaskTuple | None:
    matches = list(_MARKER_RE.finditer(fragment))
    if tuple(m.group(1) for m in matches) != task.marker_order:
        diagnostics.dropped_fragments += 1
        return None
    contents: dict[str, str] = {}
    for m in matches:
        next_open = fragment.find("[", m.end())
        end = next_open if next_open != -1 else len(fragment)
        contents[m.group(1)] = fragment[m.end() : end].strip()
    if any(not c for c in contents.values()):
        diagnostics.dropped_fragments += 1
        return None

    aspect = category = polarity = None
    if MARKER_A in contents:
        aspect = phrase_to_aspect(contents[MARKER_A], catalog)
    if MARKER_C in contents:
        category = _lenient_category(contents[MARKER_C], catalog)
        if isinstance(category, RawCategory) or category not in catalog.categories:
            diagnostics.noncatalog_categories += 1
    if MARKER_P in contents:
        words = contents[MARKER_P].split()
        # Bag-mode generation may chain several polarity words; the first one
        # wins. Any word outside the bijection still drops the fragment.
        if not all(w in catalog.word_to_polarity for w in words):
            diagnostics.unknown_polarity_words += 1
            diagnostics.dropped_fragments += 1
            return None
        polarity = word_to_polarity(words[0], catalog)
    return TaskTuple(aspect=aspect, category=category, polarity=polarity)


def parse_target(
    text: str, task: Task, catalog: LabelCatalog
) -> tuple[frozenset[TaskTuple], ParseDiagnostics]:
    """Leniently parse model output back into task tuples.

    Fragments (split on ``[;]``) missing a required marker, with markers out
    of task order, with empty element content, or with an unknown polarity
    word are dropped and counted. Identical tuples are deduplicated. Category
    phrases that map to no catalog label are retained and counted.
    """
    diagnostics = ParseDiagnostics()
    kept: list[TaskTuple] = []
    for fragment in _SEPARATOR_RE.split(text):
        if not fragment.strip():
            continue
        parsed = _fragment_tuple(fragment, task, catalog, diagnostics)
        if parsed is None:
            continue
        if parsed in kept:
            diagnostics.duplicate_tuples_removed += 1
        else:
            kept.append(parsed)
    return frozenset(kept), diagnostics


def build_corpus_pairs(
    corpus: Corpus | Iterable[Sentence],
    tasks: Sequence[Task],
    catalog: LabelCatalog,
    include_empty: bool = False,
) -> list[ExamplePair]:
    """Emit one (input, target) pair per sentence per requested task.

    Target tuples keep gold annotation order. Sentences without opinions are
    skipped unless ``include_empty`` is set, in which case their target is the
    empty string.
    """
    language = corpus.language if isinstance(corpus, Corpus) else ""
    pairs: list[ExamplePair] = []
    for sentence in corpus:
        for task in tasks:
            projected = project_tuples_ordered(sentence.tuples, task)
            if not projected and not include_empty:
                continue
            pairs.append(
                ExamplePair(
                    input_text=build_input(sentence.text, task),
                    target_text=linearize(projected, task, catalog),
                    source_sentence_id=sentence.id,
                    task=task,
                    language=sentence.language or language,
                )
            )
    return pairs
