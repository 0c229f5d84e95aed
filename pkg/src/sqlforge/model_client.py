"""Generation clients: a chat-completions HTTP client with retry/backoff
and a deterministic scripted mock for tests and offline runs.

Mock script files are JSON-lines; each entry is
``{"match": <optional prompt substring>, "responses": [...], "cycle": <bool>}``.
Entries are consulted in file order; the first matching entry with
responses remaining serves the request. ``cycle`` entries never exhaust.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .errors import (
    AuthError,
    EndpointUnreachable,
    MalformedResponse,
    MockExhausted,
)

DEFAULT_MAX_TOKENS = 512
DEFAULT_STOP_SEQUENCES = (";\n\n",)
API_KEY_ENV = "SQLFORGE_API_KEY"


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    temperature: float = 0.5
    n: int = 1
    max_tokens: int = DEFAULT_MAX_TOKENS
    stop_sequences: tuple[str, ...] = DEFAULT_STOP_SEQUENCES

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.n < 1:
            raise ValueError("n must be at least 1")


@dataclass(frozen=True)
class GenerationResponse:
    completions: tuple[str, ...]
    model_name: str = ""
    usage: dict = field(default_factory=dict)


def extract_sql(completion: str) -> str:
    """Strip markdown code fences and keep the first SQL statement."""
    text = completion.strip()
    if text.startswith("```"):
        first_newline = text.find("\n")
        if first_newline != -1:
            text = text[first_newline + 1 :]
        else:
            text = text[3:]
        fence_end = text.rfind("```")
        if fence_end != -1:
            text = text[:fence_end]
        text = text.strip()
    # First statement only: cut at the first ';' outside string literals.
    in_string = False
    for i, ch in enumerate(text):
        if ch == "'":
            in_string = not in_string
        elif ch == ";" and not in_string:
            text = text[:i]
            break
    return text.strip()


class HttpModelClient:
    """Chat-completions JSON-over-HTTP client with exponential backoff."""

    def __init__(
        self,
        endpoint_url: str,
        model_name: str = "default",
        api_key_env: str = API_KEY_ENV,
        max_retries: int = 3,
        backoff_base: float = 0.5,
        request_timeout: float = 120.0,
        max_in_flight: int = 4,
    ):
        self.endpoint_url = endpoint_url
        self.model_name = model_name
        self.api_key_env = api_key_env
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.request_timeout = request_timeout
        self._gate = threading.Semaphore(max_in_flight)
        self._session = requests.Session()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        payload = {
            "model": self.model_name,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "n": request.n,
            "max_tokens": request.max_tokens,
            "stop": list(request.stop_sequences),
        }
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff_base * (2 ** (attempt - 1)))
            try:
                with self._gate:
                    resp = self._session.post(
                        self.endpoint_url,
                        json=payload,
                        headers=self._headers(),
                        timeout=self.request_timeout,
                    )
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code in (401, 403):
                raise AuthError(f"endpoint rejected credentials ({resp.status_code})")
            if resp.status_code >= 500 or resp.status_code == 429:
                last_error = EndpointUnreachable(
                    f"HTTP {resp.status_code} from {self.endpoint_url}"
                )
                continue
            return self._parse_response(resp, request)
        raise EndpointUnreachable(
            f"{self.endpoint_url} unreachable after {self.max_retries + 1} attempts: {last_error}"
        )

    def _parse_response(self, resp, request: GenerationRequest) -> GenerationResponse:
        try:
            body = resp.json()
            choices = body["choices"]
            completions = tuple(c["message"]["content"] for c in choices)
        except (ValueError, KeyError, TypeError) as exc:
            raise MalformedResponse(f"cannot parse endpoint response: {exc}") from exc
        if len(completions) != request.n:
            raise MalformedResponse(
                f"asked for {request.n} completions, got {len(completions)}"
            )
        return GenerationResponse(
            completions=completions,
            model_name=body.get("model", self.model_name),
            usage=body.get("usage", {}),
        )


@dataclass
class _MockEntry:
    responses: list[str]
    match: str | None = None
    cycle: bool = False
    cursor: int = 0

    def remaining(self) -> int:
        if self.cycle:
            return 1 << 30
        return len(self.responses) - self.cursor

    def take(self) -> str:
        if self.cycle:
            value = self.responses[self.cursor % len(self.responses)]
        else:
            value = self.responses[self.cursor]
        self.cursor += 1
        return value


class MockModelClient:
    """Deterministic scripted stand-in for a model endpoint."""

    def __init__(self, entries: list[dict], model_name: str = "mock"):
        self._entries = [
            _MockEntry(
                responses=list(e["responses"]),
                match=e.get("match"),
                cycle=bool(e.get("cycle", False)),
            )
            for e in entries
        ]
        self.model_name = model_name
        self.call_count = 0
        self._lock = threading.Lock()

    @classmethod
    def from_script(cls, path: str | Path) -> "MockModelClient":
        entries = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    entries.append(json.loads(line))
        return cls(entries, model_name=f"mock:{path}")

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        with self._lock:
            self.call_count += 1
            completions = []
            for _ in range(request.n):
                entry = self._find_entry(request.prompt)
                if entry is None:
                    raise MockExhausted(
                        f"no scripted response for prompt starting "
                        f"{request.prompt[:60]!r}"
                    )
                completions.append(entry.take())
            return GenerationResponse(
                completions=tuple(completions), model_name=self.model_name
            )

    def _find_entry(self, prompt: str) -> _MockEntry | None:
        for entry in self._entries:
            if entry.remaining() <= 0:
                continue
            if entry.match is None or entry.match in prompt:
                return entry
        return None


@dataclass(frozen=True)
class ModelEndpoint:
    """Either a remote URL or a mock script path. ``spec`` accepts
    ``http(s)://...`` or ``mock:<path>``."""

    url: str | None = None
    mock_script: str | None = None
    model_name: str = "default"
    max_retries: int = 3
    max_in_flight: int = 4

    @classmethod
    def parse(cls, spec: str) -> "ModelEndpoint":
        if spec.startswith(("http://", "https://")):
            return cls(url=spec)
        if spec.startswith("mock:"):
            return cls(mock_script=spec[len("mock:") :])
        raise ValueError(f"endpoint spec must be http(s)://... or mock:<path>, got {spec!r}")

    def make_client(self):
        if self.mock_script is not None:
            return MockModelClient.from_script(self.mock_script)
        if self.url is None:
            raise ValueError("endpoint has neither url nor mock_script")
        return HttpModelClient(
            self.url,
            model_name=self.model_name,
            max_retries=self.max_retries,
            max_in_flight=self.max_in_flight,
        )
