"""Command-line pipeline: ingest, pairs, decode, parse, eval, prompt, llm, serve.

Every stage reads and writes JSONL so intermediate artifacts are diffable and
each step is independently testable. All randomness is derived from ``--seed``,
so reruns are byte-identical. Failures print one machine-readable JSON object
to standard error and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

from . import bridge, constrain, decode, evalkit, grammar, ingest, llm, tokens
from .grammar import TaskTuple
from .model import AspectTerm, Category, LabelCatalog, Polarity, RawCategory, Split, Task


class CliError(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        _fail("usage_error", message, code=2)


def _fail(error: str, detail: str, code: int = 1) -> None:
    sys.stderr.write(json.dumps({"error": error, "detail": detail}) + "\n")
    raise SystemExit(code)


def _atomic_write(path: str, data: bytes) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(path: str | None, data: bytes) -> None:
    if path is None or path == "-":
        sys.stdout.write(data.decode("utf-8"))
    else:
        _atomic_write(path, data)


def _jsonl(records: Iterable[dict[str, Any]]) -> bytes:
    return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records).encode("utf-8")


def _read_jsonl_records(path: str) -> list[dict[str, Any]]:
    records = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise CliError(f"{path}:{line_no}: invalid JSON: {exc}") from None
    return records


def _read_corpus(path: str, split: Split = Split.TEST) -> ingest.Corpus:
    return ingest.read_jsonl(Path(path).read_bytes(), split=split)


def _catalog(args: argparse.Namespace) -> LabelCatalog:
    if getattr(args, "catalog", None):
        return LabelCatalog.from_corpus(_read_corpus(args.catalog))
    return LabelCatalog()


def _task(name: str) -> Task:
    try:
        return Task(name.lower())
    except ValueError:
        raise CliError(f"unknown task {name!r}; expected one of "
                       f"{', '.join(t.value for t in Task)}") from None


def _tasks(spec: str) -> list[Task]:
    if spec.lower() == "all":
        return list(Task)
    return [_task(part) for part in spec.split(",") if part]


def _tuple_record(t: TaskTuple, task: Task) -> dict[str, Any]:
    record: dict[str, Any] = {}
    if "A" in task.marker_order:
        record["term"] = None if t.aspect.is_implicit else t.aspect.text
    if "C" in task.marker_order:
        record["category"] = t.category.render()
    if "P" in task.marker_order:
        record["polarity"] = t.polarity.value
    return record


def _record_tuple(record: dict[str, Any], task: Task) -> TaskTuple:
    aspect = category = polarity = None
    if "A" in task.marker_order:
        term = record.get("term")
        aspect = AspectTerm.implicit() if term is None else AspectTerm.explicit(term)
    if "C" in task.marker_order:
        label = record["category"]
        try:
            category = Category.parse(label)
        except ValueError:
            category = RawCategory(label)
    if "P" in task.marker_order:
        polarity = Polarity(record["polarity"])
    return TaskTuple(aspect=aspect, category=category, polarity=polarity)


def _sort_key(record: dict[str, Any]) -> tuple:
    return (
        str(record.get("term") or ""),
        str(record.get("category") or ""),
        str(record.get("polarity") or ""),
    )


# --- subcommands --------------------------------------------------------------


def cmd_ingest(args: argparse.Namespace) -> None:
    split = Split(args.split)
    corpus = ingest.parse_semeval_xml(
        Path(args.xml).read_bytes(), language=args.lang, split=split,
        drop_conflicts=args.drop_conflicts,
    )
    if args.dev_out:
        train, dev = ingest.split_train_dev(corpus)
        _emit(args.out, ingest.write_jsonl(train))
        _atomic_write(args.dev_out, ingest.write_jsonl(dev))
    else:
        _emit(args.out, ingest.write_jsonl(corpus))


def cmd_stats(args: argparse.Namespace) -> None:
    corpus = _read_corpus(args.input)
    stats = ingest.compute_stats(corpus)
    _emit(args.out, (json.dumps(stats.as_dict(), ensure_ascii=False) + "\n").encode("utf-8"))


def cmd_pairs(args: argparse.Namespace) -> None:
    corpus = _read_corpus(args.input)
    catalog = _catalog(args)
    pairs = grammar.build_corpus_pairs(corpus, _tasks(args.tasks), catalog, args.include_empty)
    _emit(
        args.out,
        _jsonl(
            {
                "id": p.source_sentence_id,
                "task": p.task.value,
                "lang": p.language,
                "input": p.input_text,
                "target": p.target_text,
            }
            for p in pairs
        ),
    )


def _build_scorer(
    name: str,
    sentence: ingest.Sentence,
    task: Task,
    catalog: LabelCatalog,
    vocab: tokens.Vocab,
    session: constrain.ConstraintSession,
    seed: int,
    leak_rate: float,
) -> tuple[decode.Scorer, list[int]]:
    input_ids = vocab.ensure_all(tokens.tokenize(sentence.text))
    case_seed = decode.stable_seed(seed, sentence.id)
    if name == "tabular":
        inputs, target = decode.memorize_target(sentence, task, catalog, vocab)
        return decode.TabularScorer({tuple(inputs): target}, len(vocab), vocab.id(tokens.EOS)), inputs
    if name == "leaky":
        inputs, target = decode.leaky_target(sentence, task, catalog, vocab, seed, leak_rate)
        return decode.TabularScorer({tuple(inputs): target}, len(vocab), vocab.id(tokens.EOS)), inputs
    if name == "seeded":
        return decode.SeededScorer(len(vocab), case_seed), input_ids
    if name == "adversarial":
        return decode.AdversarialScorer(session, len(vocab), case_seed), input_ids
    raise CliError(f"unknown scorer {name!r}")


def cmd_decode(args: argparse.Namespace) -> None:
    corpus = _read_corpus(args.input)
    catalog = _catalog(args)
    task = _task(args.task)
    records = []
    for sentence in corpus:
        session, vocab = tokens.build_session(
            sentence.text, task, catalog,
            mode=args.mode, allow_empty=args.allow_empty, max_len=args.max_len,
        )
        scorer, input_ids = _build_scorer(
            args.scorer, sentence, task, catalog, vocab, session, args.seed, args.leak_rate
        )
        if args.unconstrained:
            outcome = decode.unconstrained_greedy_decode(
                scorer, input_ids, args.max_len, vocab.id(tokens.EOS)
            )
        else:
            outcome = decode.greedy_decode(scorer, input_ids, session)
        records.append(
            {
                "id": sentence.id,
                "task": task.value,
                "raw": vocab.decode(outcome.tokens),
                "terminated_by": outcome.terminated_by,
                "steps": outcome.steps,
            }
        )
    _emit(args.out, _jsonl(records))


def cmd_parse(args: argparse.Namespace) -> None:
    task = _task(args.task)
    catalog = _catalog(args)
    records = []
    for record in _read_jsonl_records(args.input):
        parsed, diagnostics = grammar.parse_target(record["raw"], task, catalog)
        tuple_records = sorted((_tuple_record(t, task) for t in parsed), key=_sort_key)
        records.append(
            {"id": record["id"], "tuples": tuple_records, "diagnostics": vars(diagnostics)}
        )
    _emit(args.out, _jsonl(records))


def _predictions_from_file(
    path: str, task: Task, catalog: LabelCatalog
) -> dict[str, frozenset[TaskTuple]]:
    predictions: dict[str, frozenset[TaskTuple]] = {}
    for record in _read_jsonl_records(path):
        if "tuples" in record:
            parsed = frozenset(_record_tuple(r, task) for r in record["tuples"])
        elif "raw" in record:
            parsed, _ = grammar.parse_target(record["raw"], task, catalog)
        else:
            raise CliError(f"{path}: prediction lines need a 'tuples' or 'raw' key")
        predictions[str(record["id"])] = parsed
    return predictions


def cmd_eval(args: argparse.Namespace) -> None:
    task = _task(args.task)
    catalog = _catalog(args)
    gold_corpus = _read_corpus(args.gold)
    gold = {
        s.id: grammar.project_tuples(s.tuples, task) for s in gold_corpus
    }
    reports = []
    for path in args.pred:
        predictions = _predictions_from_file(path, task, catalog)
        reports.append(
            evalkit.micro_scores(
                predictions, gold, case_normalize=args.case_normalize,
                per_sentence=args.per_sentence,
            )
        )
    if len(reports) == 1 and not args.runs:
        report = reports[0]
        payload: dict[str, Any] = {
            "task": task.value,
            "tp": report.tp,
            "pred_count": report.pred_count,
            "gold_count": report.gold_count,
            "precision": report.precision,
            "recall": report.recall,
            "f1": report.f1,
            "case_normalized": args.case_normalize,
        }
        if args.per_sentence:
            payload["per_sentence"] = {
                sid: {"tp": tp, "pred": p, "gold": g}
                for sid, (tp, p, g) in sorted(report.per_sentence.items())
            }
        _emit(args.out, (json.dumps(payload, ensure_ascii=False) + "\n").encode("utf-8"))
        return
    aggregate = evalkit.aggregate_runs([r.f1 * 100.0 for r in reports])
    if args.format == "json":
        payload = {
            "task": task.value,
            "runs": list(aggregate.run_f1s),
            "mean": aggregate.mean,
            "ci_halfwidth": aggregate.ci_halfwidth,
            "case_normalized": args.case_normalize,
        }
        _emit(args.out, (json.dumps(payload, ensure_ascii=False) + "\n").encode("utf-8"))
    else:
        matrix = {(task.value, args.source_lang, gold_corpus.language or "tgt"): aggregate}
        notes = [f"runs={len(reports)}", f"case_normalized={args.case_normalize}"]
        _emit(args.out, evalkit.emit_report(matrix, fmt=args.format, notes=notes).encode("utf-8"))


def cmd_prompt(args: argparse.Namespace) -> None:
    corpus = _read_corpus(args.input)
    catalog = _catalog(args)
    task = _task(args.task)
    demonstrations: tuple[tuple[str, str], ...] = ()
    if args.shots:
        if not args.train:
            raise CliError("--shots requires --train for demonstrations")
        train = _read_corpus(args.train, split=Split.TRAIN)
        demonstrations = llm.demonstrations_from_corpus(train, task, catalog, args.shots)
        if len(demonstrations) < args.shots:
            raise CliError(f"training corpus has only {len(demonstrations)} sentences")
    spec = llm.PromptSpec(
        task=task, language=corpus.language, n_shots=args.shots,
        demonstrations=demonstrations, catalog=catalog,
    )
    _emit(
        args.out,
        _jsonl({"id": s.id, "prompt": llm.build_prompt(spec, s.text)} for s in corpus),
    )


def cmd_llm(args: argparse.Namespace) -> None:
    config = llm.EndpointConfig(
        url=args.endpoint,
        model=args.model,
        mode=args.mode,
        fixtures_dir=Path(args.fixtures) if args.fixtures else None,
    )
    records = []
    for record in _read_jsonl_records(args.prompts):
        response = llm.call_endpoint(record["prompt"], config)
        records.append({"id": record["id"], "raw": response})
    _emit(args.out, _jsonl(records))


def cmd_serve(args: argparse.Namespace) -> None:
    server = bridge.BridgeServer()
    if args.port is not None:
        bridge.serve_tcp(args.host, args.port, server)
    else:
        bridge.serve_stdio(server, sys.stdin, sys.stdout)


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="absakit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="review XML -> corpus JSONL")
    p.add_argument("--xml", required=True)
    p.add_argument("--lang", required=True)
    p.add_argument("--split", default="train", choices=[s.value for s in Split])
    p.add_argument("--drop-conflicts", action="store_true")
    p.add_argument("--out", default="-")
    p.add_argument("--dev-out", help="also apply the 9:1 split; write dev here")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("stats", help="corpus statistics")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("pairs", help="build (input, target) example pairs")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--task", "--tasks", dest="tasks", required=True,
                   help="task name, comma list, or 'all'")
    p.add_argument("--include-empty", action="store_true")
    p.add_argument("--catalog", help="corpus JSONL to harvest the category set from")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_pairs)

    p = sub.add_parser("decode", help="mock-scorer greedy decoding")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--task", required=True)
    p.add_argument("--scorer", default="tabular",
                   choices=["tabular", "seeded", "adversarial", "leaky"])
    arm = p.add_mutually_exclusive_group()
    arm.add_argument("--constrained", action="store_true", help="apply the mask (default)")
    arm.add_argument("--unconstrained", action="store_true")
    p.add_argument("--mode", default="bag", choices=["bag", "trie"])
    p.add_argument("--allow-empty", action="store_true")
    p.add_argument("--max-len", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--leak-rate", type=float, default=1.0)
    p.add_argument("--catalog")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("parse", help="raw generations -> tuples + diagnostics")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--task", required=True)
    p.add_argument("--catalog")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("eval", help="exact-match micro F1 against gold")
    p.add_argument("--pred", nargs="+", required=True,
                   help="prediction JSONL; several files = several runs")
    p.add_argument("--gold", required=True)
    p.add_argument("--task", required=True)
    p.add_argument("--runs", action="store_true", help="aggregate runs with a 95%% CI")
    p.add_argument("--case-normalize", action="store_true")
    p.add_argument("--per-sentence", action="store_true")
    p.add_argument("--format", default="json", choices=["json", "csv", "markdown"])
    p.add_argument("--source-lang", default="src")
    p.add_argument("--catalog")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("prompt", help="emit LLM prompts")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--task", required=True)
    p.add_argument("--shots", type=int, default=0)
    p.add_argument("--train", help="training corpus JSONL for demonstrations")
    p.add_argument("--catalog")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_prompt)

    p = sub.add_parser("llm", help="call a chat endpoint or replay fixtures")
    p.add_argument("--prompts", required=True)
    p.add_argument("--endpoint", help="URL (default: LLM_ENDPOINT env var)")
    p.add_argument("--model", default="chat-default")
    p.add_argument("--mode", default="live", choices=["live", "replay", "record"])
    p.add_argument("--fixtures")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_llm)

    p = sub.add_parser("serve", help="run the token-mask bridge server")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, help="serve TCP on this port (default: stdio)")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except SystemExit:
        raise
    except KeyboardInterrupt:
        return 130
    except Exception as exc:
        _fail(type(exc).__name__, str(exc))
    return 0


if __name__ == "__main__":
    sys.exit(main())
