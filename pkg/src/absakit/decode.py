"""Greedy generation drivers and deterministic mock scorers.

A scorer is any callable ``score(input_tokens, prefix) -> per-id scores``
(one float per vocabulary id, higher preferred, deterministic for fixed
inputs). The constrained driver restricts each argmax to the automaton's
admissible set; the unconstrained driver is the baseline arm that searches
the whole vocabulary. Ties always break toward the lowest token id.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

from . import constrain
from .constrain import ConstraintSession, DeadEnd, IllFormedPrefix, SessionCursor
from .grammar import TaskTuple, linearize, project_tuples_ordered
from .model import AspectTerm, LabelCatalog, Sentence, Task
from .tokens import Vocab, tokenize


class Scorer(Protocol):
    def __call__(self, input_tokens: Sequence[int], prefix: Sequence[int]) -> Sequence[float]: ...


EOS_TERMINATED = "eos"
LENGTH_TERMINATED = "max_len"


@dataclass(frozen=True)
class DecodeOutcome:
    tokens: tuple[int, ...]
    terminated_by: str
    steps: int

    def __post_init__(self) -> None:
        if self.steps != len(self.tokens):
            raise ValueError("steps must equal the number of generated tokens")


def greedy_decode(
    scorer: Scorer, input_tokens: Sequence[int], session: ConstraintSession
) -> DecodeOutcome:
    """Greedy search restricted to the admissible set at every step."""
    cursor = SessionCursor(session)
    out: list[int] = []
    while len(out) < session.max_len:
        allowed = cursor.allowed()
        if not allowed:
            raise DeadEnd(f"no admissible token after {len(out)} steps")
        scores = scorer(input_tokens, out)
        best = max(allowed, key=lambda t: (scores[t], -t))
        cursor.advance(best)
        out.append(best)
        if best == session.specials.eos:
            return DecodeOutcome(tuple(out), EOS_TERMINATED, len(out))
    return DecodeOutcome(tuple(out), LENGTH_TERMINATED, len(out))


def unconstrained_greedy_decode(
    scorer: Scorer, input_tokens: Sequence[int], max_len: int, eos_id: int
) -> DecodeOutcome:
    """Baseline greedy search over the full vocabulary (no mask)."""
    out: list[int] = []
    while len(out) < max_len:
        scores = scorer(input_tokens, out)
        best = max(range(len(scores)), key=lambda t: (scores[t], -t))
        out.append(best)
        if best == eos_id:
            return DecodeOutcome(tuple(out), EOS_TERMINATED, len(out))
    return DecodeOutcome(tuple(out), LENGTH_TERMINATED, len(out))


def stable_seed(*key: object) -> int:
    # hash() is salted for strings; derive seeds through a real digest instead.
    digest = hashlib.blake2b(repr(key).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def _stable_rng(*key: object) -> random.Random:
    return random.Random(stable_seed(*key))


class TabularScorer:
    """Memorizes one target sequence per input; favors the next target token.

    Positions past the end of the memorized target (and unknown inputs) favor
    eos. All other ids score zero, so the favored token is the unique argmax.
    """

    def __init__(
        self, table: Mapping[Sequence[int], Sequence[int]], vocab_size: int, eos_id: int
    ) -> None:
        self.table = {tuple(k): tuple(v) for k, v in table.items()}
        self.vocab_size = vocab_size
        self.eos_id = eos_id

    def __call__(self, input_tokens: Sequence[int], prefix: Sequence[int]) -> list[float]:
        scores = [0.0] * self.vocab_size
        target = self.table.get(tuple(input_tokens), ())
        favored = target[len(prefix)] if len(prefix) < len(target) else self.eos_id
        scores[favored] = 1.0
        return scores


class SeededScorer:
    """Pseudo-random scores, reproducible for a fixed (seed, input, prefix)."""

    def __init__(self, vocab_size: int, seed: int) -> None:
        self.vocab_size = vocab_size
        self.seed = seed

    def __call__(self, input_tokens: Sequence[int], prefix: Sequence[int]) -> list[float]:
        rng = _stable_rng(self.seed, tuple(input_tokens), tuple(prefix))
        return [rng.random() for _ in range(self.vocab_size)]


class AdversarialScorer:
    """Ranks every id *outside* the admissible set above every id inside it.

    The worst case for the mask: any unconstrained argmax lands on a
    disallowed token. Within each side of the split, the order is seeded
    noise. When the prefix is not classifiable (unconstrained decoding has
    wandered off-grammar) every id is treated as disallowed.
    """

    def __init__(self, session: ConstraintSession, vocab_size: int, seed: int) -> None:
        self.session = session
        self.vocab_size = vocab_size
        self.seed = seed

    def __call__(self, input_tokens: Sequence[int], prefix: Sequence[int]) -> list[float]:
        rng = _stable_rng(self.seed, tuple(input_tokens), tuple(prefix))
        try:
            allowed = constrain.allowed_tokens(prefix, self.session)
        except IllFormedPrefix:
            allowed = frozenset()
        return [rng.random() + (0.0 if t in allowed else 10.0) for t in range(self.vocab_size)]


def memorize_target(
    sentence: Sentence, task: Task, catalog: LabelCatalog, vocab: Vocab
) -> tuple[list[int], list[int]]:
    """(input ids, gold target ids incl. eos) for one sentence, growing the vocab."""
    input_ids = vocab.ensure_all(tokenize(sentence.text))
    projected = project_tuples_ordered(sentence.tuples, task)
    target = linearize(projected, task, catalog)
    target_ids = vocab.ensure_all(tokenize(target)) + [vocab.id("<eos>")]
    return input_ids, target_ids


def leaky_target(
    sentence: Sentence,
    task: Task,
    catalog: LabelCatalog,
    vocab: Vocab,
    seed: int,
    leak_rate: float = 1.0,
) -> tuple[list[int], list[int]]:
    """A gold target whose aspect words are swapped for out-of-sentence tokens.

    Models a system that learned the output format but emits aspect terms in
    the source language: each explicit aspect word is replaced, with
    probability ``leak_rate``, by a sibling token (``src:<word>``) that exists
    in the vocabulary but never in the input sentence.
    """
    rng = _stable_rng("leak", seed, sentence.id)
    input_ids = vocab.ensure_all(tokenize(sentence.text))
    projected = project_tuples_ordered(sentence.tuples, task)
    leaked: list[TaskTuple] = []
    for t in projected:
        aspect = t.aspect
        if aspect is not None and not aspect.is_implicit:
            words = [
                f"src:{w}" if rng.random() < leak_rate else w for w in aspect.text.split()
            ]
            aspect = AspectTerm.explicit(" ".join(words))
        leaked.append(TaskTuple(aspect=aspect, category=t.category, polarity=t.polarity))
    target = linearize(leaked, task, catalog)
    target_ids = vocab.ensure_all(tokenize(target)) + [vocab.id("<eos>")]
    return input_ids, target_ids
