"""Prompt construction and a generic chat-completion client.

Prompts are rendered from one pinned template so experiment runs are
reproducible byte-for-byte; responses are parsed with the same lenient parser
the rest of the pipeline uses. The client speaks the common JSON-over-HTTP
chat shape and supports an offline replay mode backed by a fixture directory
keyed on the request hash.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .grammar import ParseDiagnostics, TaskTuple, category_phrase, marker_prompt, parse_target
from .model import Corpus, LabelCatalog, Polarity, Task
from . import grammar


class EndpointError(RuntimeError):
    pass


class EndpointUnreachable(EndpointError):
    pass


class AuthFailure(EndpointError):
    pass


class RateLimited(EndpointError):
    pass


class FixtureMissing(EndpointError):
    """Replay mode has no stored response for this request."""


_ELEMENT_NAMES = {"A": "aspect term", "C": "aspect category", "P": "sentiment polarity"}

MAX_SHOTS = 10


@dataclass(frozen=True)
class PromptSpec:
    task: Task
    language: str
    n_shots: int = 0
    demonstrations: tuple[tuple[str, str], ...] = ()
    catalog: LabelCatalog = field(default_factory=LabelCatalog)

    def __post_init__(self) -> None:
        object.__setattr__(self, "demonstrations", tuple(tuple(d) for d in self.demonstrations))
        if not 0 <= self.n_shots <= MAX_SHOTS:
            raise ValueError(f"n_shots must be in 0..{MAX_SHOTS}")
        if len(self.demonstrations) != self.n_shots:
            raise ValueError("demonstrations must match n_shots exactly")


def demonstrations_from_corpus(
    corpus: Corpus, task: Task, catalog: LabelCatalog, n_shots: int
) -> tuple[tuple[str, str], ...]:
    """The first ``n_shots`` training sentences, each with its gold target."""
    head = list(corpus)[:n_shots]
    demos = []
    for sentence in head:
        projected = grammar.project_tuples_ordered(sentence.tuples, task)
        demos.append((sentence.text, grammar.linearize(projected, task, catalog)))
    return tuple(demos)


def build_prompt(spec: PromptSpec, sentence_text: str) -> str:
    """Render the task prompt; pure function of (spec, sentence)."""
    markers = spec.task.marker_order
    elements = [_ELEMENT_NAMES[m] for m in markers]
    if len(elements) == 1:
        element_list = elements[0]
    else:
        element_list = ", ".join(elements[:-1]) + " and " + elements[-1]

    lines = [
        f"You will read a restaurant review. Extract every opinion's {element_list}.",
    ]
    if "A" in markers:
        lines.append(
            f'If the opinion target is not named in the review, write "{spec.catalog.implicit_word}" as the aspect term.'
        )
    if "C" in markers:
        phrases = ", ".join(sorted(category_phrase(c) for c in spec.catalog.categories))
        lines.append(f"The aspect category must be one of: {phrases}.")
    if "P" in markers:
        words = spec.catalog.polarity_words
        lines.append(
            "The sentiment polarity must be one of: "
            f'"{words[Polarity.POSITIVE]}" (positive), "{words[Polarity.NEUTRAL]}" (neutral), '
            f'"{words[Polarity.NEGATIVE]}" (negative).'
        )
    slots = " ".join(f"[{m}] {_ELEMENT_NAMES[m]}" for m in markers)
    lines.append(f"Answer with one line of the form: {slots}")
    lines.append("Join multiple opinions with [;] on the same line.")
    lines.append("")
    for demo_text, demo_target in spec.demonstrations:
        lines.append(f"Review: {demo_text}")
        lines.append(f"Answer: {demo_target}")
        lines.append("")
    lines.append(f"Review: {sentence_text}")
    lines.append("Answer:")
    return "\n".join(lines)


LIVE = "live"
REPLAY = "replay"
RECORD = "record"


@dataclass
class EndpointConfig:
    url: str | None = None
    api_key: str | None = None
    model: str = "chat-default"
    mode: str = LIVE
    fixtures_dir: Path | None = None
    max_attempts: int = 3
    backoff_s: float = 0.5
    timeout_s: float = 60.0

    def __post_init__(self) -> None:
        if self.url is None:
            self.url = os.environ.get("LLM_ENDPOINT")
        if self.api_key is None:
            self.api_key = os.environ.get("LLM_API_KEY")
        if self.fixtures_dir is not None:
            self.fixtures_dir = Path(self.fixtures_dir)


def request_payload(prompt: str, config: EndpointConfig) -> dict:
    return {"model": config.model, "messages": [{"role": "user", "content": prompt}]}


def request_hash(prompt: str, config: EndpointConfig) -> str:
    canonical = json.dumps(request_payload(prompt, config), sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _fixture_path(prompt: str, config: EndpointConfig) -> Path:
    if config.fixtures_dir is None:
        raise FixtureMissing("no fixtures directory configured")
    return config.fixtures_dir / f"{request_hash(prompt, config)}.txt"


def _http_call(prompt: str, config: EndpointConfig) -> str:
    if not config.url:
        raise EndpointUnreachable("no endpoint URL configured (set LLM_ENDPOINT)")
    body = json.dumps(request_payload(prompt, config)).encode("utf-8")
    headers = {"Content-Type": "application/json"}
    if config.api_key:
        headers["Authorization"] = f"Bearer {config.api_key}"
    last_error: Exception | None = None
    for attempt in range(config.max_attempts):
        if attempt:
            time.sleep(config.backoff_s * 2 ** (attempt - 1))
        request = urllib.request.Request(config.url, data=body, headers=headers)
        try:
            with urllib.request.urlopen(request, timeout=config.timeout_s) as response:
                payload = json.loads(response.read().decode("utf-8"))
                return payload["choices"][0]["message"]["content"]
        except urllib.error.HTTPError as exc:
            if exc.code in (401, 403):
                raise AuthFailure(f"endpoint rejected credentials (HTTP {exc.code})") from None
            last_error = exc  # 429 and 5xx are retried
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            last_error = exc
    if isinstance(last_error, urllib.error.HTTPError) and last_error.code == 429:
        raise RateLimited(f"rate limited after {config.max_attempts} attempts") from None
    raise EndpointUnreachable(
        f"endpoint unreachable after {config.max_attempts} attempts: {last_error}"
    ) from None


def call_endpoint(prompt: str, config: EndpointConfig) -> str:
    """Single-turn completion; replay/record modes go through the fixture store."""
    if config.mode == REPLAY:
        path = _fixture_path(prompt, config)
        if not path.exists():
            raise FixtureMissing(f"no fixture for request hash {path.stem}")
        return path.read_text(encoding="utf-8")
    response = _http_call(prompt, config)
    if config.mode == RECORD:
        path = _fixture_path(prompt, config)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(response, encoding="utf-8")
    return response


@dataclass(frozen=True)
class ChatExchange:
    request: str
    response: str
    parsed: frozenset[TaskTuple]
    diagnostics: ParseDiagnostics


def exchange(spec: PromptSpec, sentence_text: str, config: EndpointConfig) -> ChatExchange:
    """Prompt, call, and parse one sentence; parsing reuses the DSL parser."""
    prompt = build_prompt(spec, sentence_text)
    response = call_endpoint(prompt, config)
    parsed, diagnostics = parse_target(response, spec.task, spec.catalog)
    return ChatExchange(request=prompt, response=response, parsed=parsed, diagnostics=diagnostics)


def exchange_many(
    spec: PromptSpec,
    sentence_texts: Sequence[str],
    config: EndpointConfig,
    max_in_flight: int = 4,
) -> list[ChatExchange]:
    """Run several sentences with a bounded number of concurrent requests."""
    with ThreadPoolExecutor(max_workers=max(1, max_in_flight)) as pool:
        return list(pool.map(lambda text: exchange(spec, text, config), sentence_texts))
