"""Generative ABSA toolkit: marker DSL, constrained decoding, evaluation."""

from .constrain import (
    CandidateSets,
    ConstraintSession,
    DecodeState,
    IllFormedPrefix,
    SpecialTokens,
    accepts,
    allowed_tokens,
    classify_state,
)
from .decode import DecodeOutcome, greedy_decode, unconstrained_greedy_decode
from .evalkit import EvalReport, RunAggregate, aggregate_runs, emit_report, micro_scores
from .grammar import (
    ExamplePair,
    ParseDiagnostics,
    TaskTuple,
    build_corpus_pairs,
    build_input,
    linearize,
    parse_target,
    project_tuples,
)
from .ingest import compute_stats, parse_semeval_xml, read_jsonl, split_train_dev, write_jsonl
from .model import (
    AspectTerm,
    Category,
    Corpus,
    LabelCatalog,
    Polarity,
    RawCategory,
    Sentence,
    SentimentTuple,
    Split,
    Task,
)

__version__ = "0.1.0"

__all__ = [
    "AspectTerm",
    "CandidateSets",
    "Category",
    "ConstraintSession",
    "Corpus",
    "DecodeOutcome",
    "DecodeState",
    "EvalReport",
    "ExamplePair",
    "IllFormedPrefix",
    "LabelCatalog",
    "ParseDiagnostics",
    "Polarity",
    "RawCategory",
    "RunAggregate",
    "Sentence",
    "SentimentTuple",
    "SpecialTokens",
    "Split",
    "Task",
    "TaskTuple",
    "accepts",
    "aggregate_runs",
    "allowed_tokens",
    "build_corpus_pairs",
    "build_input",
    "classify_state",
    "compute_stats",
    "emit_report",
    "greedy_decode",
    "linearize",
    "micro_scores",
    "parse_semeval_xml",
    "parse_target",
    "project_tuples",
    "read_jsonl",
    "split_train_dev",
    "unconstrained_greedy_decode",
    "write_jsonl",
]
