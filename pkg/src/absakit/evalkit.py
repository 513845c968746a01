"""Exact-tuple micro precision/recall/F1, multi-run intervals, report tables."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .grammar import TaskTuple
from .model import AspectTerm


class IdMismatch(ValueError):
    """Prediction and gold files disagree on the sentence id set."""


class TooFewRuns(ValueError):
    """Confidence intervals need at least two runs."""


@dataclass(frozen=True)
class EvalReport:
    tp: int
    pred_count: int
    gold_count: int
    precision: float
    recall: float
    f1: float
    per_sentence: Mapping[str, tuple[int, int, int]] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.tp > min(self.pred_count, self.gold_count):
            raise ValueError("true positives cannot exceed either side's count")
        for value in (self.precision, self.recall, self.f1):
            if not 0.0 <= value <= 1.0:
                raise ValueError("scores must lie in [0, 1]")

    @classmethod
    def from_counts(
        cls,
        tp: int,
        pred_count: int,
        gold_count: int,
        per_sentence: Mapping[str, tuple[int, int, int]] | None = None,
    ) -> EvalReport:
        precision = tp / pred_count if pred_count else 0.0
        recall = tp / gold_count if gold_count else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        return cls(tp, pred_count, gold_count, precision, recall, f1, per_sentence)


def casefold_tuples(tuples: Iterable[TaskTuple]) -> frozenset[TaskTuple]:
    """Lowercase explicit aspect terms (opt-in evaluation normalization)."""
    folded = set()
    for t in tuples:
        aspect = t.aspect
        if aspect is not None and not aspect.is_implicit:
            aspect = AspectTerm.explicit(aspect.text.lower())
        folded.add(TaskTuple(aspect=aspect, category=t.category, polarity=t.polarity))
    return frozenset(folded)


def micro_scores(
    predictions: Mapping[str, Iterable[TaskTuple]],
    gold: Mapping[str, Iterable[TaskTuple]],
    case_normalize: bool = False,
    per_sentence: bool = False,
) -> EvalReport:
    """Micro-averaged exact-match scores over sentence-aligned tuple sets.

    A predicted tuple is correct only when every element matches a gold tuple
    of the same sentence. Both sides are deduplicated before counting, so
    repeated predictions are never rewarded or double-penalized.
    """
    if set(predictions) != set(gold):
        missing = set(gold) ^ set(predictions)
        raise IdMismatch(f"sentence ids differ between predictions and gold: {sorted(missing)[:5]}")
    tp = pred_count = gold_count = 0
    breakdown: dict[str, tuple[int, int, int]] = {}
    for sentence_id in sorted(gold):
        pred_set = frozenset(predictions[sentence_id])
        gold_set = frozenset(gold[sentence_id])
        if case_normalize:
            pred_set = casefold_tuples(pred_set)
            gold_set = casefold_tuples(gold_set)
        hits = len(pred_set & gold_set)
        tp += hits
        pred_count += len(pred_set)
        gold_count += len(gold_set)
        if per_sentence:
            breakdown[sentence_id] = (hits, len(pred_set), len(gold_set))
    return EvalReport.from_counts(tp, pred_count, gold_count, breakdown if per_sentence else None)


# --- Student-t interval -----------------------------------------------------


def _betacf(a: float, b: float, x: float) -> float:
    # Continued-fraction evaluation of the incomplete beta (Lentz's method).
    max_iter, eps, fpmin = 300, 3e-14, 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def _betai(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log(1.0 - x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_cdf(t: float, df: int) -> float:
    x = df / (df + t * t)
    tail = 0.5 * _betai(df / 2.0, 0.5, x)
    return 1.0 - tail if t >= 0 else tail


def student_t_quantile(p: float, df: int) -> float:
    """Inverse CDF of Student's t by bisection; p in (0.5, 1)."""
    if not 0.5 < p < 1.0:
        raise ValueError("quantile implemented for p in (0.5, 1)")
    lo, hi = 0.0, 1.0
    while student_t_cdf(hi, df) < p:
        hi *= 2.0
        if hi > 1e9:
            raise ArithmeticError("t quantile search diverged")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if student_t_cdf(mid, df) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class RunAggregate:
    run_f1s: tuple[float, ...]
    mean: float
    ci_halfwidth: float


def aggregate_runs(run_f1s: Sequence[float], confidence: float = 0.95) -> RunAggregate:
    """Mean with a two-sided Student-t interval over repeated-run scores.

    Half-width is ``t(1 - alpha/2, n-1) * s / sqrt(n)`` with the sample
    standard deviation; unit-agnostic (fractions or F1-points alike).
    """
    values = tuple(float(v) for v in run_f1s)
    if len(values) < 2:
        raise TooFewRuns(f"need at least 2 runs, got {len(values)}")
    mean = statistics.fmean(values)
    sd = statistics.stdev(values)
    t = student_t_quantile(1.0 - (1.0 - confidence) / 2.0, len(values) - 1)
    halfwidth = t * sd / math.sqrt(len(values))
    return RunAggregate(values, mean, halfwidth)


# --- Report emission ---------------------------------------------------------


def format_cell(aggregate: RunAggregate) -> str:
    return f"{aggregate.mean:.1f}±{aggregate.ci_halfwidth:.1f}"


def emit_report(
    matrix: Mapping[tuple[str, str, str], RunAggregate],
    fmt: str = "csv",
    notes: Sequence[str] = (),
) -> str:
    """Deterministic wide table keyed by (task, source_lang, target_lang).

    One row per task, one column per language pair, cells ``mean±halfwidth``
    to one decimal in whatever unit the aggregates carry (conventionally
    F1-points). Rows and columns are sorted, so output is reproducible.
    """
    if fmt not in ("csv", "markdown"):
        raise ValueError(f"unknown report format {fmt!r}")
    tasks = sorted({key[0] for key in matrix})
    pairs = sorted({(key[1], key[2]) for key in matrix})
    header = ["task"] + [f"{src}->{tgt}" for src, tgt in pairs]
    rows = []
    for task in tasks:
        row = [task]
        for src, tgt in pairs:
            aggregate = matrix.get((task, src, tgt))
            row.append(format_cell(aggregate) if aggregate else "")
        rows.append(row)

    lines = [f"# {note}" for note in notes]
    if fmt == "csv":
        lines.append(",".join(header))
        lines.extend(",".join(row) for row in rows)
    else:
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + "|".join(" --- " for _ in header) + "|")
        lines.extend("| " + " | ".join(row) + " |" for row in rows)
    return "\n".join(lines) + "\n"
