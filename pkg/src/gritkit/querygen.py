"""Task-oriented query generation with a generate-then-validate loop.

A text backend rewrites a keyword query into a full task statement; a
second prompt asks the backend whether the rewrite still expresses the
same requirements, parsed as a yes/no verdict. Rewrites that never clear
validation are kept and flagged, never dropped.

The default prompts below are best-effort reconstructions, not canonical
wording; override them via configuration where exact phrasing matters.
"""

from __future__ import annotations

import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Protocol

import httpx

from .errors import BackendError, ConfigError, FormatError, UnparsableVerdict
from .models import Query

DEFAULT_GENERATION_PROMPT = (
    "Rewrite the product search query below as a complete task-oriented request: "
    "state the shopping task with an explicit action verb and keep every requirement "
    "from the original. Respond with the rewritten query only.\n"
    "Query: {query}"
)
DEFAULT_VALIDATION_PROMPT = (
    "Do the two queries below express the same product requirements? "
    "Begin your answer with yes or no.\n"
    "Query A: {original}\n"
    "Query B: {candidate}"
)

BENCHMARK_COLUMNS = ("query_id", "original_query", "task_oriented_query", "validated")


@dataclass(frozen=True)
class PromptTemplates:
    generation: str = DEFAULT_GENERATION_PROMPT
    validation: str = DEFAULT_VALIDATION_PROMPT


@dataclass(frozen=True)
class GenerationRecord:
    query_id: str
    original: str
    generated: str
    attempts: int
    validated: bool


class TextGenBackend(Protocol):
    def complete(self, prompt: str) -> str: ...


class MockBackend:
    """Deterministic stand-in for a live model, a pure function of the prompt.

    Understands the default prompt structure: prompts carrying "Query A:"
    and "Query B:" are answered with the configured verdict, everything
    else is treated as a generation request whose query follows the last
    "Query:" marker. canned maps exact query texts to fixed rewrites.
    """

    def __init__(
        self,
        template: str = "Find {query} for purchase",
        verdict: str = "yes",
        canned: Mapping[str, str] | None = None,
    ):
        self.template = template
        self.verdict = verdict
        self.canned = dict(canned or {})

    def complete(self, prompt: str) -> str:
        if "Query A:" in prompt and "Query B:" in prompt:
            return self.verdict
        query = prompt.rsplit("Query:", 1)[-1].strip()
        return self.canned.get(query) or self.template.format(query=query)


class HttpChatBackend:
    """Chat-completion client for OpenAI-style HTTP endpoints.

    POSTs {"model", "messages"} to the endpoint and returns the first
    choice's message content. Transport errors and 5xx responses are
    retried with exponential backoff; 4xx responses fail immediately. A
    semaphore caps in-flight requests when callers fan out over threads.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        auth_env: str | None = None,
        timeout: float = 30.0,
        max_in_flight: int = 4,
        max_attempts: int = 3,
        backoff_base: float = 0.5,
        transport: httpx.BaseTransport | None = None,
    ):
        if not endpoint:
            raise ConfigError("http backend needs an endpoint URL")
        if not model:
            raise ConfigError("http backend needs a model name")
        self.endpoint = endpoint
        self.model = model
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        headers = {}
        if auth_env:
            token = os.environ.get(auth_env)
            if not token:
                raise ConfigError(f"auth token environment variable {auth_env} is not set")
            headers["Authorization"] = f"Bearer {token}"
        self._sem = threading.BoundedSemaphore(max_in_flight)
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    def complete(self, prompt: str) -> str:
        payload = {"model": self.model, "messages": [{"role": "user", "content": prompt}]}
        last: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff_base * 2 ** (attempt - 1))
            try:
                with self._sem:
                    response = self._client.post(self.endpoint, json=payload)
            except httpx.HTTPError as exc:
                last = exc
                continue
            if response.status_code >= 500:
                last = BackendError(f"HTTP {response.status_code} from {self.endpoint}")
                continue
            if response.status_code != 200:
                raise BackendError(f"HTTP {response.status_code} from {self.endpoint}: {response.text[:200]}")
            try:
                return response.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError, ValueError) as exc:
                raise BackendError(f"malformed completion response: {exc}") from exc
        raise BackendError(f"giving up after {self.max_attempts} attempts: {last}")

    def close(self) -> None:
        self._client.close()


def validate_equivalence(
    original: str,
    candidate: str,
    backend: TextGenBackend,
    prompts: PromptTemplates = PromptTemplates(),
) -> bool:
    """Ask the backend for a yes/no verdict on requirement equivalence."""
    reply = backend.complete(prompts.validation.format(original=original, candidate=candidate))
    tokens = reply.strip().split()
    first = tokens[0].strip(".,:;!?").lower() if tokens else ""
    if first == "yes":
        return True
    if first == "no":
        return False
    raise UnparsableVerdict(f"verdict reply did not start with yes or no: {reply[:80]!r}")


def generate_task_query(
    query: Query,
    backend: TextGenBackend,
    max_retries: int = 5,
    prompts: PromptTemplates = PromptTemplates(),
) -> GenerationRecord:
    """Generate a task-oriented rewrite, retrying until validation passes.

    Each attempt generates and validates once; an unparsable verdict counts
    as a failed attempt. After max_retries failures the last candidate is
    returned flagged validated=False. Backend failures abort with the
    attempt number attached.
    """
    if max_retries < 1:
        raise ValueError(f"max_retries must be >= 1, got {max_retries}")
    candidate = ""
    for attempt in range(1, max_retries + 1):
        try:
            candidate = backend.complete(prompts.generation.format(query=query.text)).strip()
            ok = validate_equivalence(query.text, candidate, backend, prompts)
        except UnparsableVerdict:
            ok = False
        except BackendError as exc:
            raise BackendError(f"attempt {attempt} for query {query.query_id}: {exc}") from exc
        if ok:
            return GenerationRecord(query.query_id, query.text, candidate, attempt, True)
    return GenerationRecord(query.query_id, query.text, candidate, max_retries, False)


def _clean_field(value: str) -> str:
    return " ".join(value.split())


def read_benchmark(path: str | Path) -> list[GenerationRecord]:
    """Read a benchmark TSV back; attempt counts are not persisted."""
    source = str(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].split("\t") != list(BENCHMARK_COLUMNS):
        raise FormatError(f"expected header {' '.join(BENCHMARK_COLUMNS)}", source=source, line=1)
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise FormatError(f"expected 4 tab-separated fields, got {len(fields)}", source=source, line=lineno)
        qid, original, generated, validated = fields
        if validated not in ("true", "false"):
            raise FormatError(f"bad validated flag {validated!r}", source=source, line=lineno)
        records.append(GenerationRecord(qid, original, generated, 0, validated == "true"))
    return records


def generate_benchmark(
    queries: Iterable[Query],
    backend: TextGenBackend,
    out_path: str | Path,
    max_retries: int = 5,
    prompts: PromptTemplates = PromptTemplates(),
    resume: bool = False,
) -> list[GenerationRecord]:
    """Write one rewrite per query to a TSV, in ascending query id order.

    Rows are flushed as they finish, so the output doubles as a
    checkpoint: a backend abort leaves the finished rows behind and
    resume=True skips them on the next call without duplicating ids.
    Rewrites keep the original query id so relevance judgments still apply.
    """
    ordered = sorted(queries, key=lambda q: q.query_id)
    done: dict[str, GenerationRecord] = {}
    out_path = Path(out_path)
    if resume and out_path.exists():
        done = {r.query_id: r for r in read_benchmark(out_path)}
    mode = "a" if done else "w"
    records: list[GenerationRecord] = []
    with open(out_path, mode, encoding="utf-8") as fh:
        if mode == "w":
            fh.write("\t".join(BENCHMARK_COLUMNS) + "\n")
        for query in ordered:
            if query.query_id in done:
                records.append(done[query.query_id])
                continue
            record = generate_task_query(query, backend, max_retries, prompts)
            fh.write(
                "\t".join(
                    (
                        record.query_id,
                        _clean_field(record.original),
                        _clean_field(record.generated),
                        "true" if record.validated else "false",
                    )
                )
                + "\n"
            )
            fh.flush()
            records.append(record)
    return records
