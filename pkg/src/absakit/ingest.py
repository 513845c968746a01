"""Corpus ingestion: review XML, a JSONL interchange format, splits, stats."""

from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Any

from .model import (
    AspectTerm,
    Category,
    Corpus,
    Polarity,
    Sentence,
    SentimentTuple,
    Split,
)


class IngestError(ValueError):
    pass


class MalformedXml(IngestError):
    pass


class UnknownPolarityLabel(IngestError):
    pass


class MissingCategoryAttribute(IngestError):
    pass


class SchemaViolation(IngestError):
    def __init__(self, line: int, detail: str) -> None:
        super().__init__(f"line {line}: {detail}")
        self.line = line


_POLARITY_BY_LABEL = {p.value: p for p in Polarity}


def _opinion_tuple(node: ET.Element, sentence_id: str) -> SentimentTuple:
    category_label = node.get("category")
    if category_label is None:
        raise MissingCategoryAttribute(f"opinion without category in sentence {sentence_id!r}")
    polarity_label = node.get("polarity", "")
    if polarity_label not in _POLARITY_BY_LABEL:
        raise UnknownPolarityLabel(
            f"polarity {polarity_label!r} in sentence {sentence_id!r}"
        )
    target = node.get("target")
    if target is None or target == "NULL":
        aspect = AspectTerm.implicit()
    else:
        start, end = int(node.get("from", 0)), int(node.get("to", 0))
        span = (start, end) if start < end else None
        aspect = AspectTerm.explicit(target, span)
    try:
        category = Category.parse(category_label)
    except ValueError as exc:
        raise MissingCategoryAttribute(str(exc)) from None
    return SentimentTuple(aspect, category, _POLARITY_BY_LABEL[polarity_label])


def parse_semeval_xml(
    data: bytes | str,
    language: str,
    split: Split = Split.TRAIN,
    drop_conflicts: bool = False,
) -> Corpus:
    """Parse review XML (``sentence`` elements with ``Opinion`` annotations).

    ``target="NULL"`` becomes an implicit aspect term; ``from``/``to`` offsets
    are captured as spans when non-degenerate. Duplicate opinions within a
    sentence collapse to one (evaluation is set-based). The ``conflict``
    polarity present in some releases is an error unless ``drop_conflicts``.
    """
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise MalformedXml(str(exc)) from None

    sentences: list[Sentence] = []
    for node in root.iter("sentence"):
        sentence_id = node.get("id", f"sentence-{len(sentences)}")
        text = node.findtext("text")
        if text is None:
            raise MalformedXml(f"sentence {sentence_id!r} has no text element")
        tuples: list[SentimentTuple] = []
        for opinion in node.iter("Opinion"):
            if drop_conflicts and opinion.get("polarity") == "conflict":
                continue
            parsed = _opinion_tuple(opinion, sentence_id)
            if parsed not in tuples:
                tuples.append(parsed)
        sentences.append(Sentence(id=sentence_id, language=language, text=text, tuples=tuple(tuples)))
    return Corpus(sentences=tuple(sentences), split=split, language=language)


def split_train_dev(corpus: Corpus) -> tuple[Corpus, Corpus]:
    """Deterministic 9:1 split: every tenth sentence (index 9 mod 10) is dev."""
    train = [s for i, s in enumerate(corpus) if i % 10 != 9]
    dev = [s for i, s in enumerate(corpus) if i % 10 == 9]
    return (
        Corpus(tuple(train), Split.TRAIN, corpus.language),
        Corpus(tuple(dev), Split.DEV, corpus.language),
    )


@dataclass(frozen=True)
class CorpusStats:
    sentences: int
    tuples: int
    distinct_categories: int
    polarity_counts: dict[Polarity, int]
    null_aspects: int

    def __post_init__(self) -> None:
        if sum(self.polarity_counts.values()) != self.tuples:
            raise ValueError("polarity counts must sum to the tuple count")

    def as_dict(self) -> dict[str, Any]:
        return {
            "sentences": self.sentences,
            "tuples": self.tuples,
            "distinct_categories": self.distinct_categories,
            "polarity_counts": {p.value: n for p, n in sorted(self.polarity_counts.items(), key=lambda kv: kv[0].value)},
            "null_aspects": self.null_aspects,
        }


def compute_stats(corpus: Corpus) -> CorpusStats:
    categories: set[Category] = set()
    polarity_counts = {p: 0 for p in Polarity}
    tuples = 0
    null_aspects = 0
    for sentence in corpus:
        for t in sentence.tuples:
            tuples += 1
            polarity_counts[t.polarity] += 1
            if isinstance(t.category, Category):
                categories.add(t.category)
            if t.aspect.is_implicit:
                null_aspects += 1
    return CorpusStats(
        sentences=len(corpus),
        tuples=tuples,
        distinct_categories=len(categories),
        polarity_counts=polarity_counts,
        null_aspects=null_aspects,
    )


def _sentence_to_record(sentence: Sentence) -> dict[str, Any]:
    tuples = []
    for t in sentence.tuples:
        span = t.aspect.span
        tuples.append(
            {
                "term": t.aspect.text,
                "from": span[0] if span else None,
                "to": span[1] if span else None,
                "category": t.category.render(),
                "polarity": t.polarity.value,
            }
        )
    return {"id": sentence.id, "lang": sentence.language, "text": sentence.text, "tuples": tuples}


def _record_to_sentence(record: dict[str, Any], line: int) -> Sentence:
    for key in ("id", "lang", "text", "tuples"):
        if key not in record:
            raise SchemaViolation(line, f"missing required key {key!r}")
    tuples: list[SentimentTuple] = []
    for entry in record["tuples"]:
        term = entry.get("term")
        if term is None:
            aspect = AspectTerm.implicit()
        else:
            start, end = entry.get("from"), entry.get("to")
            span = (start, end) if start is not None and end is not None else None
            aspect = AspectTerm.explicit(term, span)
        try:
            category = Category.parse(entry["category"])
            polarity = _POLARITY_BY_LABEL[entry["polarity"]]
        except (KeyError, ValueError) as exc:
            raise SchemaViolation(line, f"bad tuple entry {entry!r}: {exc}") from None
        parsed = SentimentTuple(aspect, category, polarity)
        if parsed not in tuples:
            tuples.append(parsed)
    try:
        return Sentence(
            id=str(record["id"]), language=record["lang"], text=record["text"], tuples=tuple(tuples)
        )
    except ValueError as exc:
        raise SchemaViolation(line, str(exc)) from None


def write_jsonl(corpus: Corpus) -> bytes:
    lines = [json.dumps(_sentence_to_record(s), ensure_ascii=False) for s in corpus]
    return ("".join(line + "\n" for line in lines)).encode("utf-8")


def read_jsonl(
    data: bytes | str, split: Split = Split.TEST, language: str | None = None
) -> Corpus:
    """Inverse of :func:`write_jsonl`; raises :class:`SchemaViolation` with the
    offending 1-based line number."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    sentences: list[Sentence] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaViolation(line_no, f"invalid JSON: {exc}") from None
        if not isinstance(record, dict):
            raise SchemaViolation(line_no, "line is not a JSON object")
        sentences.append(_record_to_sentence(record, line_no))
    if language is None:
        language = sentences[0].language if sentences else ""
    return Corpus(tuple(sentences), split, language)
