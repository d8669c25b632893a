from __future__ import annotations

import json

import httpx
import pytest

from gritkit.errors import BackendError, ConfigError, FormatError, UnparsableVerdict
from gritkit.models import Query
from gritkit.querygen import (
    GenerationRecord,
    HttpChatBackend,
    MockBackend,
    PromptTemplates,
    generate_benchmark,
    generate_task_query,
    read_benchmark,
    validate_equivalence,
)


class FlakyVerdictBackend(MockBackend):
    """Returns scripted verdicts in order, one per validation call."""

    def __init__(self, verdicts):
        super().__init__()
        self.verdicts = list(verdicts)
        self.generation_calls = 0

    def complete(self, prompt: str) -> str:
        if "Query A:" in prompt and "Query B:" in prompt:
            return self.verdicts.pop(0)
        self.generation_calls += 1
        return super().complete(prompt)


class TestMockBackend:
    def test_deterministic_rewrite(self):
        backend = MockBackend()
        record = generate_task_query(Query("q1", "red shoe"), backend)
        assert record == GenerationRecord("q1", "red shoe", "Find red shoe for purchase", 1, True)
        again = generate_task_query(Query("q1", "red shoe"), backend)
        assert again == record

    def test_canned_rewrites_take_priority(self):
        backend = MockBackend(canned={
            "06 honda odyssey a/c compressor":
                "Locate a replacement AC compressor for a 2006 Honda Odyssey",
        })
        record = generate_task_query(
            Query("q1", "06 honda odyssey a/c compressor"), backend)
        assert record.generated == (
            "Locate a replacement AC compressor for a 2006 Honda Odyssey")
        assert record.validated


class TestValidation:
    def test_yes_no_parsing(self):
        assert validate_equivalence("a", "b", MockBackend(verdict="yes"))
        assert validate_equivalence("a", "b", MockBackend(verdict="Yes, same intent."))
        assert not validate_equivalence("a", "b", MockBackend(verdict="No."))
        assert not validate_equivalence("a", "b", MockBackend(verdict="no - different"))

    def test_unparsable_verdict_raises(self):
        with pytest.raises(UnparsableVerdict):
            validate_equivalence("a", "b", MockBackend(verdict="maybe so"))
        with pytest.raises(UnparsableVerdict):
            validate_equivalence("a", "b", MockBackend(verdict=""))

    def test_failed_validation_retries_then_flags(self):
        backend = FlakyVerdictBackend(["no", "no", "yes"])
        record = generate_task_query(Query("q", "usb hub"), backend, max_retries=5)
        assert record.validated and record.attempts == 3
        assert backend.generation_calls == 3

    def test_unparsable_counts_as_failed_attempt(self):
        backend = FlakyVerdictBackend(["hmm", "yes"])
        record = generate_task_query(Query("q", "usb hub"), backend, max_retries=5)
        assert record.validated and record.attempts == 2

    def test_exhausted_retries_keep_last_candidate_flagged(self):
        backend = FlakyVerdictBackend(["no"] * 4)
        record = generate_task_query(Query("q", "usb hub"), backend, max_retries=4)
        assert not record.validated
        assert record.attempts == 4
        assert record.generated == "Find usb hub for purchase"

    def test_max_retries_validated(self):
        with pytest.raises(ValueError):
            generate_task_query(Query("q", "x"), MockBackend(), max_retries=0)

    def test_backend_error_names_attempt_and_query(self):
        class Exploding:
            def complete(self, prompt):
                raise BackendError("boom")

        with pytest.raises(BackendError, match="attempt 1 for query q9"):
            generate_task_query(Query("q9", "x"), Exploding())

    def test_custom_prompts_are_used(self):
        seen = []

        class Recorder(MockBackend):
            def complete(self, prompt):
                seen.append(prompt)
                return super().complete(prompt)

        prompts = PromptTemplates(
            generation="REWRITE-ME\nQuery: {query}",
            validation="SAME?\nQuery A: {original}\nQuery B: {candidate}",
        )
        generate_task_query(Query("q", "oak desk"), Recorder(), prompts=prompts)
        assert seen[0] == "REWRITE-ME\nQuery: oak desk"
        assert seen[1].startswith("SAME?")


class TestBenchmarkFile:
    def test_write_read_round_trip(self, tmp_path):
        queries = [Query("q2", "usb hub"), Query("q1", "red shoe")]
        path = tmp_path / "bench.tsv"
        records = generate_benchmark(queries, MockBackend(), path)
        assert [r.query_id for r in records] == ["q1", "q2"]  # sorted on write
        loaded = read_benchmark(path)
        assert [(r.query_id, r.original, r.generated, r.validated) for r in loaded] == [
            ("q1", "red shoe", "Find red shoe for purchase", True),
            ("q2", "usb hub", "Find usb hub for purchase", True),
        ]

    def test_header_checked(self, tmp_path):
        path = tmp_path / "bench.tsv"
        path.write_text("query_id\toriginal\n", encoding="utf-8")
        with pytest.raises(FormatError) as err:
            read_benchmark(path)
        assert err.value.line == 1

    def test_bad_validated_flag(self, tmp_path):
        path = tmp_path / "bench.tsv"
        path.write_text(
            "query_id\toriginal_query\ttask_oriented_query\tvalidated\n"
            "q1\ta\tb\tmaybe\n",
            encoding="utf-8",
        )
        with pytest.raises(FormatError) as err:
            read_benchmark(path)
        assert err.value.line == 2

    def test_multiline_rewrites_flattened(self, tmp_path):
        backend = MockBackend(template="Find\t{query}\nnow")
        path = tmp_path / "bench.tsv"
        generate_benchmark([Query("q1", "x")], backend, path)
        loaded = read_benchmark(path)
        assert loaded[0].generated == "Find x now"

    def test_abort_leaves_checkpoint_and_resume_skips_done(self, tmp_path):
        path = tmp_path / "bench.tsv"

        class ExplodeOn:
            def __init__(self, bad_query):
                self.bad = bad_query
                self.inner = MockBackend()
                self.calls = []

            def complete(self, prompt):
                if f"Query: {self.bad}" in prompt:
                    raise BackendError("outage")
                if "Query A:" not in prompt:
                    self.calls.append(prompt.rsplit("Query: ", 1)[-1])
                return self.inner.complete(prompt)

        queries = [Query("q1", "aa"), Query("q2", "bb"), Query("q3", "cc")]
        with pytest.raises(BackendError, match="query q2"):
            generate_benchmark(queries, ExplodeOn("bb"), path)
        assert [r.query_id for r in read_benchmark(path)] == ["q1"]

        healthy = ExplodeOn("never")
        records = generate_benchmark(queries, healthy, path, resume=True)
        assert [r.query_id for r in records] == ["q1", "q2", "q3"]
        assert healthy.calls == ["bb", "cc"]  # q1 not regenerated
        loaded = read_benchmark(path)
        assert [r.query_id for r in loaded] == ["q1", "q2", "q3"]

    def test_resume_without_existing_file_starts_fresh(self, tmp_path):
        path = tmp_path / "bench.tsv"
        records = generate_benchmark([Query("q1", "x")], MockBackend(), path, resume=True)
        assert len(records) == 1 and path.exists()

    def test_rerun_without_resume_overwrites(self, tmp_path):
        path = tmp_path / "bench.tsv"
        generate_benchmark([Query("q1", "x"), Query("q2", "y")], MockBackend(), path)
        generate_benchmark([Query("q1", "x")], MockBackend(), path)
        assert [r.query_id for r in read_benchmark(path)] == ["q1"]


def chat_response(content):
    return {"choices": [{"message": {"role": "assistant", "content": content}}]}


def make_backend(handler, **kwargs):
    kwargs.setdefault("backoff_base", 0.0)  # keep retry tests instant
    return HttpChatBackend(
        "https://api.example.test/v1/chat/completions", "test-model",
        transport=httpx.MockTransport(handler), **kwargs)


class TestHttpChatBackend:
    def test_successful_completion(self):
        def handler(request):
            payload = json.loads(request.content)
            assert payload["model"] == "test-model"
            assert payload["messages"][0]["content"] == "hello"
            return httpx.Response(200, json=chat_response("world"))

        assert make_backend(handler).complete("hello") == "world"

    def test_server_errors_retry_then_succeed(self):
        calls = []

        def handler(request):
            calls.append(1)
            if len(calls) < 3:
                return httpx.Response(503, text="busy")
            return httpx.Response(200, json=chat_response("ok"))

        assert make_backend(handler).complete("x") == "ok"
        assert len(calls) == 3

    def test_server_errors_exhaust_attempts(self):
        def handler(request):
            return httpx.Response(500, text="down")

        with pytest.raises(BackendError, match="giving up after 3 attempts"):
            make_backend(handler).complete("x")

    def test_client_error_fails_immediately(self):
        calls = []

        def handler(request):
            calls.append(1)
            return httpx.Response(401, text="bad key")

        with pytest.raises(BackendError, match="HTTP 401"):
            make_backend(handler).complete("x")
        assert len(calls) == 1

    def test_transport_error_retries(self):
        calls = []

        def handler(request):
            calls.append(1)
            if len(calls) == 1:
                raise httpx.ConnectError("refused")
            return httpx.Response(200, json=chat_response("ok"))

        assert make_backend(handler).complete("x") == "ok"

    def test_malformed_response_body(self):
        def handler(request):
            return httpx.Response(200, json={"choices": []})

        with pytest.raises(BackendError, match="malformed"):
            make_backend(handler).complete("x")

    def test_missing_auth_env_fails_before_any_request(self, monkeypatch):
        monkeypatch.delenv("TEST_TOKEN_VAR", raising=False)
        calls = []

        def handler(request):
            calls.append(1)
            return httpx.Response(200, json=chat_response("ok"))

        with pytest.raises(ConfigError, match="TEST_TOKEN_VAR"):
            make_backend(handler, auth_env="TEST_TOKEN_VAR")
        assert calls == []

    def test_auth_header_sent(self, monkeypatch):
        monkeypatch.setenv("TEST_TOKEN_VAR", "sekret")

        def handler(request):
            assert request.headers["Authorization"] == "Bearer sekret"
            return httpx.Response(200, json=chat_response("ok"))

        assert make_backend(handler, auth_env="TEST_TOKEN_VAR").complete("x") == "ok"

    def test_requires_endpoint_and_model(self):
        with pytest.raises(ConfigError, match="endpoint"):
            HttpChatBackend("", "m")
        with pytest.raises(ConfigError, match="model"):
            HttpChatBackend("https://x.test", "")
