"""Uniform client for text-completion backends: a generic HTTP API or a
deterministic mock.

The mock backend is a pure function of (prompt, seed). It finds the last
double-quoted span in the prompt, treats it as the guiding principle, and
emits two paragraph-tagged blocks that embed that principle verbatim, so
downstream parsing can be exercised without any network access.

Wire format (HTTP backend):
    POST {base_url}  JSON {"prompt", "maxTokens", "temperature", "stopSequences"}
    ->  {"completions": [{"text": str, "finishReason": str}]}
API key is read from the environment variable named by api_key_env
(default QUANDARY_BACKEND_KEY) and sent as a bearer token.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

FINISH_REASONS = ("stop_sequence", "length", "backend_stop")

_QUOTED = re.compile(r'"([^"\n]+)"')

_RETRIABLE_STATUSES = {429, 500, 502, 503, 504}

_OPENERS = (
    "On reflection,",
    "At first glance,",
    "Taken seriously,",
    "In this situation,",
    "Weighed carefully,",
    "Looked at plainly,",
    "In the end,",
    "All things considered,",
)
_CLOSERS = (
    "That duty does not dissolve merely because it is inconvenient.",
    "What follows is less a verdict than a direction of travel.",
    "Acting on it asks honesty about what you owe the people involved.",
    "The cost of ignoring it falls on those least able to object.",
    "Anything less would treat the people involved as means only.",
    "It is a rule worth keeping even when no one is watching.",
    "That thought should steady the decision rather than settle it.",
    "Whether it binds here depends on what you can reasonably foresee.",
)
_THEMES = (
    "loyalty", "candor", "fairness", "consent", "privacy", "duty", "mercy",
    "trust", "harm", "benefit", "autonomy", "obligation", "gratitude",
    "promise-keeping", "impartiality", "self-interest", "community", "honesty",
    "responsibility", "care", "reciprocity", "dignity", "prudence", "courage",
    "forgiveness", "accountability", "welfare", "integrity", "restraint",
    "solidarity", "transparency", "humility",
)
_FALLBACK_PRINCIPLES = (
    "One should weigh the interests of everyone the decision touches.",
    "Commitments freely made should be honored.",
    "Avoidable harm to others is a reason against acting.",
    "People deserve the truth from those who owe it to them.",
)


class BackendError(Exception):
    """Base error for completion backends."""


class AuthenticationError(BackendError):
    """The backend rejected the credentials; never retried."""


class RateLimitExhaustedError(BackendError):
    """Retriable failures persisted past the retry cap."""


class MalformedPayloadError(BackendError):
    """The backend answered with a payload that does not match the wire format."""


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    max_tokens: int = 512
    temperature: float = 0.7
    stop_sequences: tuple[str, ...] = ()
    seed: int | None = None  # mock backend only

    def __post_init__(self):
        object.__setattr__(self, "stop_sequences", tuple(self.stop_sequences))
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    finish_reason: str
    backend_id: str
    latency: float

    def __post_init__(self):
        if self.finish_reason not in FINISH_REASONS:
            raise ValueError(f"finish_reason must be one of {FINISH_REASONS}")


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "mock"  # "mock" | "http"
    base_url: str = ""
    api_key_env: str = "QUANDARY_BACKEND_KEY"
    timeout: float = 30.0
    max_retries: int = 3
    backoff_base: float = 0.25
    max_inflight: int = 8
    backend_id: str = ""

    def __post_init__(self):
        if self.kind not in ("mock", "http"):
            raise ValueError("backend kind must be 'mock' or 'http'")
        if self.kind == "http" and not self.base_url:
            raise ValueError("http backend requires base_url")
        if not self.backend_id:
            object.__setattr__(self, "backend_id", self.kind if self.kind == "mock" else self.base_url)


def apply_stop_sequences(text: str, stop_sequences: tuple[str, ...]) -> tuple[str, bool]:
    """Truncate at the earliest occurrence of any stop sequence.

    The prefix before the earliest start index cannot contain a full stop
    sequence, so finish_reason=stop_sequence implies a clean text.
    """
    cut = None
    for stop in stop_sequences:
        if not stop:
            continue
        idx = text.find(stop)
        if idx != -1 and (cut is None or idx < cut):
            cut = idx
    if cut is None:
        return text, False
    return text[:cut], True


def _pick(options: tuple[str, ...], digest: bytes, position: int) -> str:
    return options[digest[position] % len(options)]


def mock_complete(request: CompletionRequest) -> CompletionResponse:
    """Deterministic completion: a pure function of (prompt, seed).

    Emits two <p>-tagged paragraphs; the first embeds, verbatim, the last
    double-quoted span found in the prompt (or a stock principle when the
    prompt quotes nothing). Identical (prompt, seed) yields byte-identical
    text on every platform; the hash is sha256, never process-seeded.
    """
    seed = request.seed if request.seed is not None else 0
    digest = hashlib.sha256(f"{seed}\x1f{request.prompt}".encode("utf-8")).digest()

    quoted = _QUOTED.findall(request.prompt)
    principle = quoted[-1] if quoted else _pick(_FALLBACK_PRINCIPLES, digest, 0)

    opener = _pick(_OPENERS, digest, 1)
    closer = _pick(_CLOSERS, digest, 2)
    w = [_pick(_THEMES, digest, 3 + i) for i in range(6)]

    first = (
        f"<p>{opener} the guiding thought is this: {principle} "
        f"Here it asks you to weigh {w[0]} and {w[1]} against {w[2]} and {w[3]}. {closer}</p>"
    )
    second = (
        f"<p>Seen from another angle, the same tension between {w[4]} and {w[5]} "
        f"returns in practice, and naming it is half the work.</p>"
    )
    return CompletionResponse(
        text=first + "\n\n" + second,
        finish_reason="backend_stop",
        backend_id="mock",
        latency=0.0,
    )


class CompletionClient:
    """Backend-agnostic completion caller with retries, an in-flight cap and a
    JSONL trace log.

    Safe for concurrent calls: the in-flight semaphore bounds simultaneous
    transport use, and a request is only ever retried after a failure, never
    after a completed exchange.
    """

    def __init__(self, config: BackendConfig, transport=None, trace_path: Path | str | None = None):
        self.config = config
        self._transport = transport or _urllib_transport
        self._trace_path = Path(trace_path) if trace_path else None
        self._trace_lock = threading.Lock()
        self._inflight = threading.Semaphore(config.max_inflight)

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        if self.config.kind == "mock":
            raw = mock_complete(request)
            attempts = 1
        else:
            raw, attempts = self._complete_http(request)

        text, truncated = apply_stop_sequences(raw.text, request.stop_sequences)
        response = CompletionResponse(
            text=text,
            finish_reason="stop_sequence" if truncated else raw.finish_reason,
            backend_id=raw.backend_id,
            latency=raw.latency,
        )
        self._trace(request, response, attempts)
        return response

    def _complete_http(self, request: CompletionRequest) -> tuple[CompletionResponse, int]:
        payload = {
            "prompt": request.prompt,
            "maxTokens": request.max_tokens,
            "temperature": request.temperature,
            "stopSequences": list(request.stop_sequences),
        }
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.config.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        attempts = 0
        last_error: Exception | None = None
        while attempts <= self.config.max_retries:
            attempts += 1
            started = time.monotonic()
            try:
                with self._inflight:
                    status, body = self._transport(self.config.base_url, payload, headers, self.config.timeout)
            except (urllib.error.URLError, TimeoutError, ConnectionError, OSError) as exc:
                last_error = exc
                if attempts <= self.config.max_retries:
                    time.sleep(self.config.backoff_base * (2 ** (attempts - 1)))
                continue
            latency = time.monotonic() - started

            if status in (401, 403):
                raise AuthenticationError(f"backend rejected credentials (HTTP {status})")
            if status in _RETRIABLE_STATUSES:
                last_error = BackendError(f"HTTP {status}")
                if attempts <= self.config.max_retries:
                    time.sleep(self.config.backoff_base * (2 ** (attempts - 1)))
                continue
            if status != 200:
                raise BackendError(f"backend returned HTTP {status}")

            return self._parse_payload(body, latency), attempts

        raise RateLimitExhaustedError(
            f"backend still failing after {self.config.max_retries} retries: {last_error}"
        )

    def _parse_payload(self, body: str, latency: float) -> CompletionResponse:
        try:
            obj = json.loads(body)
            completion = obj["completions"][0]
            text = completion["text"]
            finish = completion.get("finishReason", "")
        except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
            raise MalformedPayloadError(f"backend payload does not match wire format: {exc}") from exc
        if not isinstance(text, str):
            raise MalformedPayloadError("completion text is not a string")
        finish_reason = "length" if finish == "length" else "backend_stop"
        return CompletionResponse(
            text=text, finish_reason=finish_reason, backend_id=self.config.backend_id, latency=latency
        )

    def _trace(self, request: CompletionRequest, response: CompletionResponse, attempts: int) -> None:
        if not self._trace_path:
            return
        record = {
            "backend_id": response.backend_id,
            "prompt": request.prompt,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
            "stop_sequences": list(request.stop_sequences),
            "seed": request.seed,
            "text": response.text,
            "finish_reason": response.finish_reason,
            "latency": response.latency,
            "attempts": attempts,
        }
        with self._trace_lock:
            with self._trace_path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def complete(backend: BackendConfig, request: CompletionRequest, transport=None) -> CompletionResponse:
    """One-shot completion against the configured backend."""
    return CompletionClient(backend, transport=transport).complete(request)


def _urllib_transport(url: str, payload: dict, headers: dict, timeout: float) -> tuple[int, str]:
    data = json.dumps(payload).encode("utf-8")
    req = urllib.request.Request(url, data=data, headers=headers, method="POST")
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.status, resp.read().decode("utf-8")
    except urllib.error.HTTPError as exc:
        return exc.code, exc.read().decode("utf-8", errors="replace")
