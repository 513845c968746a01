#!/usr/bin/env python3
"""Desk-scale with/without-mask contrast on aspect-term language leakage.

Simulates a system that learned the output format but prefers out-of-sentence
("source-language") tokens at aspect positions, then decodes each case twice:
unconstrained, and constrained by the automaton. Reports how many cases emit
at least one aspect token that is not in the input sentence.
"""

from __future__ import annotations

import argparse
import random

from absakit.decode import TabularScorer, greedy_decode, leaky_target, unconstrained_greedy_decode
from absakit.grammar import parse_target
from absakit.model import AspectTerm, LabelCatalog, Polarity, Sentence, SentimentTuple, Task
from absakit.tokens import EOS, build_session

NOUNS = ["tea", "soup", "staff", "pizza", "wine", "decor", "service", "menu", "patio"]
ADJECTIVES = ["wonderful", "awful", "fine", "cold", "fresh", "slow"]


def synthetic_sentence(index: int, rng: random.Random, catalog: LabelCatalog) -> Sentence:
    first, second = rng.sample(NOUNS, 2)
    text = (
        f"The {first} was {rng.choice(ADJECTIVES)} and the {second} "
        f"seemed {rng.choice(ADJECTIVES)}"
    )
    categories = sorted(catalog.categories, key=str)
    tuples = tuple(
        SentimentTuple(AspectTerm.explicit(w), rng.choice(categories), rng.choice(list(Polarity)))
        for w in (first, second)
    )
    return Sentence(id=f"case{index}", language="en", text=text, tuples=tuples)


def leaked_aspect_tokens(raw: str, input_words: set[str], catalog: LabelCatalog) -> set[str]:
    parsed, _ = parse_target(raw, Task.TASD, catalog)
    tokens = {
        w for t in parsed if t.aspect and not t.aspect.is_implicit for w in t.aspect.text.split()
    }
    return tokens - input_words


def run(cases: int, seed: int, leak_rate: float) -> None:
    catalog = LabelCatalog()
    rng = random.Random(seed)
    free_leaky = masked_leaky = 0
    for index in range(cases):
        sentence = synthetic_sentence(index, rng, catalog)
        session, vocab = build_session(sentence.text, Task.TASD, catalog, max_len=128)
        inputs, target = leaky_target(
            sentence, Task.TASD, catalog, vocab, seed=seed + index, leak_rate=leak_rate
        )
        scorer = TabularScorer({tuple(inputs): target}, len(vocab), vocab.id(EOS))
        input_words = set(sentence.text.split()) | {catalog.implicit_word}

        free = unconstrained_greedy_decode(scorer, inputs, 128, vocab.id(EOS))
        if leaked_aspect_tokens(vocab.decode(free.tokens), input_words, catalog):
            free_leaky += 1
        masked = greedy_decode(scorer, inputs, session)
        if leaked_aspect_tokens(vocab.decode(masked.tokens), input_words, catalog):
            masked_leaky += 1

    print(f"cases with out-of-sentence aspect tokens, over {cases} cases:")
    print(f"  without mask: {free_leaky:4d}  ({100 * free_leaky / cases:.1f}%)")
    print(f"  with mask:    {masked_leaky:4d}  ({100 * masked_leaky / cases:.1f}%)")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--cases", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--leak-rate", type=float, default=0.95)
    args = parser.parse_args()
    run(args.cases, args.seed, args.leak_rate)
