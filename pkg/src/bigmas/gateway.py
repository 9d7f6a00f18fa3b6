"""Chat-completion backends and per-phase token accounting.

Two backends share the :class:`Gateway` interface:

* :class:`HttpGateway` talks to any OpenAI-compatible ``/chat/completions``
  endpoint, retrying timeouts, 429 and 5xx responses.
* :class:`ScriptedGateway` replays queued responses per phase (or asks a
  responder callable), with a deterministic character-based usage model.
"""

from __future__ import annotations

import json
import logging
import math
import os
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping, Protocol

import httpx

__all__ = [
    "PHASES",
    "DEFAULT_MAX_TOKENS",
    "DEFAULT_TEMPERATURE",
    "ChatRequest",
    "ChatResponse",
    "Usage",
    "UsageLedger",
    "Gateway",
    "GatewayError",
    "ScriptExhausted",
    "HttpGateway",
    "ScriptedGateway",
    "record_usage",
    "load_script",
]

log = logging.getLogger(__name__)

PHASES = ("design", "routing", "node_execution", "baseline")
DEFAULT_TEMPERATURE = 0.7
DEFAULT_MAX_TOKENS = {"design": 4096, "routing": 512, "node_execution": 2048, "baseline": 2048}


class GatewayError(RuntimeError):
    """The backend could not produce a response."""


class ScriptExhausted(GatewayError):
    """A scripted backend ran out of responses (a test-authoring bug)."""


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def __post_init__(self):
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be non-negative")

    @property
    def total(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def to_dict(self) -> dict:
        return {"prompt_tokens": self.prompt_tokens, "completion_tokens": self.completion_tokens}


@dataclass(frozen=True)
class ChatRequest:
    system_text: str
    user_text: str
    phase: str
    temperature: float = DEFAULT_TEMPERATURE
    max_output_tokens: int | None = None
    # local routing hints for scripted responders; never sent over the wire
    meta: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.phase not in PHASES:
            raise ValueError(f"unknown phase {self.phase!r}")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must lie in [0, 2]")
        if self.max_output_tokens is None:
            object.__setattr__(self, "max_output_tokens", DEFAULT_MAX_TOKENS[self.phase])
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")


@dataclass(frozen=True)
class ChatResponse:
    text: str
    usage: Usage


class Gateway(Protocol):
    def complete(self, req: ChatRequest) -> ChatResponse: ...


class UsageLedger:
    """Per-phase (calls, prompt_tokens, completion_tokens) accumulators."""

    def __init__(self, data: Mapping[str, Mapping[str, int]] | None = None):
        self._lock = threading.Lock()
        self._acc: dict[str, dict[str, int]] = {}
        for phase, row in (data or {}).items():
            self._acc[phase] = {k: int(row[k]) for k in ("calls", "prompt_tokens", "completion_tokens")}

    def record(self, phase: str, usage: Usage) -> "UsageLedger":
        with self._lock:
            row = self._acc.setdefault(phase, {"calls": 0, "prompt_tokens": 0, "completion_tokens": 0})
            row["calls"] += 1
            row["prompt_tokens"] += usage.prompt_tokens
            row["completion_tokens"] += usage.completion_tokens
        return self

    def merge(self, other: "UsageLedger") -> "UsageLedger":
        for phase, row in other.to_dict().items():
            with self._lock:
                mine = self._acc.setdefault(phase, {"calls": 0, "prompt_tokens": 0, "completion_tokens": 0})
                for k, v in row.items():
                    mine[k] += v
        return self

    def phase(self, phase: str) -> dict[str, int]:
        return dict(self._acc.get(phase, {"calls": 0, "prompt_tokens": 0, "completion_tokens": 0}))

    def tokens(self, phase: str) -> int:
        row = self.phase(phase)
        return row["prompt_tokens"] + row["completion_tokens"]

    @property
    def total_tokens(self) -> int:
        return sum(self.tokens(p) for p in self._acc)

    @property
    def total_calls(self) -> int:
        return sum(row["calls"] for row in self._acc.values())

    def to_dict(self) -> dict[str, dict[str, int]]:
        return {p: dict(self._acc[p]) for p in sorted(self._acc)}

    def __eq__(self, other) -> bool:
        return isinstance(other, UsageLedger) and self.to_dict() == other.to_dict()

    def __repr__(self) -> str:
        return f"UsageLedger({self.to_dict()})"


def record_usage(ledger: UsageLedger, phase: str, usage: Usage) -> UsageLedger:
    return ledger.record(phase, usage)


class HttpGateway:
    """OpenAI-compatible chat-completions client.

    ``api_key`` and ``base_url`` default to ``$OPENAI_API_KEY`` and
    ``$OPENAI_BASE_URL``. Timeouts, 429 and 5xx are retried up to
    ``max_attempts`` times with exponential backoff; other 4xx fail at once.
    """

    def __init__(
        self,
        model: str,
        base_url: str | None = None,
        api_key: str | None = None,
        timeout: float = 120.0,
        max_attempts: int = 3,
        backoff_base: float = 1.0,
        backoff_factor: float = 2.0,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.model = model
        self.base_url = (base_url or os.environ.get("OPENAI_BASE_URL") or "https://api.openai.com/v1").rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get("OPENAI_API_KEY", "")
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.backoff_factor = backoff_factor
        self._transport = transport
        self._sleep = sleep

    def _body(self, req: ChatRequest) -> dict:
        return {
            "model": self.model,
            "messages": [
                {"role": "system", "content": req.system_text},
                {"role": "user", "content": req.user_text},
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        }

    def complete(self, req: ChatRequest) -> ChatResponse:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        url = f"{self.base_url}/chat/completions"
        last_error = "no attempt made"
        with httpx.Client(timeout=self.timeout, transport=self._transport) as client:
            for attempt in range(self.max_attempts):
                if attempt:
                    self._sleep(self.backoff_base * self.backoff_factor ** (attempt - 1))
                try:
                    resp = client.post(url, json=self._body(req), headers=headers)
                except httpx.TimeoutException as exc:
                    last_error = f"timeout: {exc}"
                    log.warning("chat completion timed out (attempt %d)", attempt + 1)
                    continue
                except httpx.HTTPError as exc:
                    last_error = f"transport error: {exc}"
                    log.warning("chat completion transport error (attempt %d): %s", attempt + 1, exc)
                    continue
                if resp.status_code == 429 or resp.status_code >= 500:
                    last_error = f"HTTP {resp.status_code}"
                    log.warning("chat completion got HTTP %d (attempt %d)", resp.status_code, attempt + 1)
                    continue
                if resp.status_code >= 400:
                    raise GatewayError(f"HTTP {resp.status_code}: {resp.text[:500]}")
                return self._decode(resp)
        raise GatewayError(f"network-error after {self.max_attempts} attempts: {last_error}")

    @staticmethod
    def _decode(resp: httpx.Response) -> ChatResponse:
        try:
            data = resp.json()
            text = data["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise GatewayError(f"malformed completion body: {exc}") from exc
        usage = data.get("usage") or {}
        return ChatResponse(
            text=text,
            usage=Usage(int(usage.get("prompt_tokens") or 0), int(usage.get("completion_tokens") or 0)),
        )


def char_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


Responder = Callable[[ChatRequest], str]


class ScriptedGateway:
    """Deterministic offline backend.

    Responses come from per-phase FIFO queues, falling back to a responder
    callable (e.g. simulated agents) when a phase queue is empty. Usage is
    ``ceil(chars / 4)`` for the prompt (system + user) and the response.
    """

    def __init__(
        self,
        script: Iterable[tuple[str, str]] | Mapping[str, Iterable[str]] = (),
        responder: Responder | None = None,
    ):
        self._queues: dict[str, deque[str]] = {}
        items = script.items() if isinstance(script, Mapping) else None
        if items is not None:
            for phase, texts in items:
                self._queues.setdefault(phase, deque()).extend(texts)
        else:
            for phase, text in script:
                self._queues.setdefault(phase, deque()).append(text)
        self.responder = responder
        self.requests: list[ChatRequest] = []
        self._lock = threading.Lock()

    def __deepcopy__(self, memo):
        clone = ScriptedGateway(responder=self.responder)
        clone._queues = {p: deque(q) for p, q in self._queues.items()}
        return clone

    def remaining(self, phase: str) -> int:
        return len(self._queues.get(phase, ()))

    def complete(self, req: ChatRequest) -> ChatResponse:
        with self._lock:
            self.requests.append(req)
            queue = self._queues.get(req.phase)
            if queue:
                text = queue.popleft()
            elif self.responder is not None:
                text = None
            else:
                raise ScriptExhausted(f"no scripted response left for phase {req.phase!r}")
        if text is None:
            text = self.responder(req)
        if isinstance(text, BaseException):
            raise text
        usage = Usage(char_tokens(req.system_text + req.user_text), char_tokens(text))
        return ChatResponse(text=text, usage=usage)


def load_script(path: str | os.PathLike) -> list[tuple[str, str]]:
    """Read a JSONL manifest of ``{"phase": ..., "response": ...}`` entries."""
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                phase, text = row["phase"], row["response"]
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad script entry ({exc})") from exc
            if phase not in PHASES:
                raise ValueError(f"{path}:{lineno}: unknown phase {phase!r}")
            entries.append((phase, str(text)))
    return entries
