#!/usr/bin/env python3
"""End-to-end pipeline demo on a small synthetic review corpus.

Builds a corpus, constructs example pairs, decodes with the memorizing
scorer under constraints, parses the generations, and scores them. Every
stage goes through the CLI so the emitted artifacts match what a real run
produces. Deterministic for a fixed --seed.
"""

from __future__ import annotations

import argparse
import json
import random
from pathlib import Path

from absakit.cli import main as cli
from absakit.ingest import write_jsonl
from absakit.model import (
    AspectTerm,
    Corpus,
    LabelCatalog,
    Polarity,
    Sentence,
    SentimentTuple,
    Split,
)

NOUNS = ["tea", "soup", "staff", "pizza", "wine", "decor", "service", "menu"]
ADJECTIVES = ["wonderful", "bland", "fast", "cold", "fresh", "noisy"]


def synthetic_corpus(n: int, seed: int) -> Corpus:
    rng = random.Random(seed)
    catalog = LabelCatalog()
    categories = sorted(catalog.categories, key=str)
    sentences = []
    for i in range(n):
        first, second = rng.sample(NOUNS, 2)
        text = (
            f"The {first} was {rng.choice(ADJECTIVES)} and the {second} "
            f"seemed {rng.choice(ADJECTIVES)}"
        )
        tuples = tuple(
            SentimentTuple(
                AspectTerm.explicit(word), rng.choice(categories), rng.choice(list(Polarity))
            )
            for word in (first, second)
        )
        sentences.append(Sentence(id=f"demo{i}", language="en", text=text, tuples=tuples))
    return Corpus(tuple(sentences), Split.TEST, "en")


def run(workdir: Path, n_sentences: int, seed: int) -> None:
    workdir.mkdir(parents=True, exist_ok=True)
    corpus_path = workdir / "corpus.jsonl"
    corpus_path.write_bytes(write_jsonl(synthetic_corpus(n_sentences, seed)))

    pairs = workdir / "pairs.jsonl"
    gens = workdir / "generations.jsonl"
    parsed = workdir / "tuples.jsonl"
    report = workdir / "report.json"

    cli(["pairs", "--in", str(corpus_path), "--tasks", "all", "--out", str(pairs)])
    cli(
        [
            "decode", "--in", str(corpus_path), "--task", "tasd", "--scorer", "tabular",
            "--seed", str(seed), "--catalog", str(corpus_path), "--out", str(gens),
        ]
    )
    cli(
        [
            "parse", "--in", str(gens), "--task", "tasd",
            "--catalog", str(corpus_path), "--out", str(parsed),
        ]
    )
    cli(
        [
            "eval", "--pred", str(parsed), "--gold", str(corpus_path), "--task", "tasd",
            "--catalog", str(corpus_path), "--out", str(report),
        ]
    )

    scores = json.loads(report.read_text())
    print(f"wrote {pairs.name}, {gens.name}, {parsed.name}, {report.name} under {workdir}/")
    print(
        f"tasd micro scores: P={scores['precision']:.3f} R={scores['recall']:.3f} "
        f"F1={scores['f1']:.3f}"
    )


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", type=Path, default=Path("demo_out"))
    parser.add_argument("--sentences", type=int, default=24)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    run(args.workdir, args.sentences, args.seed)
