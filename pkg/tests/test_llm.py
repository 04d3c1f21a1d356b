from __future__ import annotations

import json

import pytest

from quandary.llm import (
    AuthenticationError,
    BackendConfig,
    CompletionClient,
    CompletionRequest,
    MalformedPayloadError,
    RateLimitExhaustedError,
    apply_stop_sequences,
    complete,
    mock_complete,
)


def http_config(**overrides):
    defaults = dict(kind="http", base_url="http://backend.test/complete", backoff_base=0.0)
    defaults.update(overrides)
    return BackendConfig(**defaults)


def ok_body(text: str, finish: str = "stop") -> str:
    return json.dumps({"completions": [{"text": text, "finishReason": finish}]})


class TestRequestValidation:
    def test_empty_prompt_rejected(self):
        with pytest.raises(ValueError):
            CompletionRequest(prompt="")

    def test_bad_max_tokens_rejected(self):
        with pytest.raises(ValueError):
            CompletionRequest(prompt="p", max_tokens=0)

    def test_negative_temperature_rejected(self):
        with pytest.raises(ValueError):
            CompletionRequest(prompt="p", temperature=-0.1)


class TestMock:
    def test_same_prompt_and_seed_is_byte_identical(self):
        req = CompletionRequest(prompt='Principle: "never lie"\nAnswer:', seed=4)
        assert mock_complete(req).text == mock_complete(req).text

    def test_output_embeds_last_quoted_principle(self):
        req = CompletionRequest(prompt='Ignore "first one". Principle: "never lie to friends"\nAnswer:', seed=0)
        text = mock_complete(req).text
        assert "never lie to friends" in text
        assert text.startswith("<p>") and text.endswith("</p>")

    def test_distinct_prompts_give_distinct_outputs(self):
        outputs = set()
        for i in range(200):
            req = CompletionRequest(prompt=f'Principle: "rule {i}"\nAnswer:', seed=0)
            outputs.add(mock_complete(req).text)
        assert len(outputs) == 200

    def test_seed_changes_output(self):
        a = mock_complete(CompletionRequest(prompt='Principle: "keep promises"', seed=1))
        b = mock_complete(CompletionRequest(prompt='Principle: "keep promises"', seed=2))
        assert a.text != b.text

    def test_unquoted_prompt_falls_back_to_stock_principle(self):
        response = mock_complete(CompletionRequest(prompt="List principles:", seed=0))
        assert response.text.startswith("<p>")
        assert response.latency == 0.0

    def test_mock_never_touches_transport(self):
        calls = []

        def recording_transport(url, payload, headers, timeout):
            calls.append(url)
            return 200, ok_body("never seen")

        client = CompletionClient(BackendConfig(kind="mock"), transport=recording_transport)
        client.complete(CompletionRequest(prompt='Principle: "x"', seed=0))
        assert calls == []


class TestStopSequences:
    def test_truncates_at_earliest_stop(self):
        text, truncated = apply_stop_sequences("abc STOP def", ("STOP",))
        assert (text, truncated) == ("abc ", True)

    def test_earliest_of_several_stops_wins(self):
        text, _ = apply_stop_sequences("one TWO three FOUR", ("FOUR", "TWO"))
        assert text == "one "

    def test_mock_two_paragraph_output_truncated_at_blank_line(self):
        client = CompletionClient(BackendConfig(kind="mock"))
        response = client.complete(
            CompletionRequest(prompt='Principle: "be kind"', stop_sequences=("\n\n",), seed=0)
        )
        assert "\n\n" not in response.text
        assert response.finish_reason == "stop_sequence"
        assert response.text.endswith("</p>")

    def test_no_stop_keeps_backend_reason(self):
        client = CompletionClient(BackendConfig(kind="mock"))
        response = client.complete(CompletionRequest(prompt='Principle: "be kind"', seed=0))
        assert response.finish_reason == "backend_stop"


class TestHttpBackend:
    def test_retry_then_success(self, tmp_path):
        statuses = [429, 200]
        calls = []

        def transport(url, payload, headers, timeout):
            calls.append(payload)
            status = statuses.pop(0)
            return status, ok_body("answer text") if status == 200 else "slow down"

        trace_path = tmp_path / "trace.jsonl"
        client = CompletionClient(http_config(), transport=transport, trace_path=trace_path)
        response = client.complete(CompletionRequest(prompt="p", seed=None))
        assert response.text == "answer text"
        assert len(calls) == 2
        trace = [json.loads(l) for l in trace_path.read_text().splitlines()]
        assert trace[-1]["attempts"] == 2

    def test_auth_failure_is_not_retried(self):
        calls = []

        def transport(url, payload, headers, timeout):
            calls.append(1)
            return 401, "no"

        client = CompletionClient(http_config(), transport=transport)
        with pytest.raises(AuthenticationError):
            client.complete(CompletionRequest(prompt="p"))
        assert len(calls) == 1

    def test_rate_limit_exhausted_after_retries(self):
        calls = []

        def transport(url, payload, headers, timeout):
            calls.append(1)
            return 429, "slow down"

        client = CompletionClient(http_config(max_retries=2), transport=transport)
        with pytest.raises(RateLimitExhaustedError):
            client.complete(CompletionRequest(prompt="p"))
        assert len(calls) == 3  # initial try + 2 retries

    def test_malformed_payload_raises(self):
        client = CompletionClient(http_config(), transport=lambda *a: (200, '{"nope": 1}'))
        with pytest.raises(MalformedPayloadError):
            client.complete(CompletionRequest(prompt="p"))

    def test_wire_format_fields(self):
        seen = {}

        def transport(url, payload, headers, timeout):
            seen.update(payload)
            return 200, ok_body("t")

        client = CompletionClient(http_config(), transport=transport)
        client.complete(CompletionRequest(prompt="p", max_tokens=64, temperature=0.2, stop_sequences=("X",)))
        assert seen == {"prompt": "p", "maxTokens": 64, "temperature": 0.2, "stopSequences": ["X"]}

    def test_api_key_sent_as_bearer(self, monkeypatch):
        monkeypatch.setenv("QUANDARY_BACKEND_KEY", "sekrit")
        seen_headers = {}

        def transport(url, payload, headers, timeout):
            seen_headers.update(headers)
            return 200, ok_body("t")

        CompletionClient(http_config(), transport=transport).complete(CompletionRequest(prompt="p"))
        assert seen_headers.get("Authorization") == "Bearer sekrit"

    def test_module_level_complete_shortcut(self):
        response = complete(BackendConfig(kind="mock"), CompletionRequest(prompt='P: "z"', seed=3))
        assert "z" in response.text


class TestTrace:
    def test_trace_is_appended_jsonl(self, tmp_path):
        trace_path = tmp_path / "trace.jsonl"
        client = CompletionClient(BackendConfig(kind="mock"), trace_path=trace_path)
        client.complete(CompletionRequest(prompt='Principle: "a"', seed=0))
        client.complete(CompletionRequest(prompt='Principle: "b"', seed=0))
        lines = [json.loads(l) for l in trace_path.read_text().splitlines()]
        assert len(lines) == 2
        assert lines[0]["backend_id"] == "mock"
        assert lines[0]["prompt"].endswith('"a"')
