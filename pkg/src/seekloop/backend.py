"""Model access: chat messages with text and image parts, and the backends behind them."""

from __future__ import annotations

import base64
import json
import math
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Protocol, Sequence, Union

import httpx

from .media import Frame
from .model import TokenUsage


@dataclass(frozen=True)
class Text:
    text: str


@dataclass(frozen=True)
class Image:
    frame: Frame
    label: float  # timestamp in seconds


Part = Union[Text, Image]


@dataclass(frozen=True)
class Message:
    role: str
    parts: tuple[Part, ...]

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"unknown role {self.role!r}")
        object.__setattr__(self, "parts", tuple(self.parts))
        if self.role == "assistant" and any(isinstance(p, Image) for p in self.parts):
            raise ValueError("assistant messages carry text only")

    @classmethod
    def text(cls, role: str, text: str) -> Message:
        return cls(role, (Text(text),))

    @property
    def content(self) -> str:
        return "".join(p.text for p in self.parts if isinstance(p, Text))

    @property
    def images(self) -> list[Image]:
        return [p for p in self.parts if isinstance(p, Image)]


@dataclass(frozen=True)
class BackendReply:
    text: str
    usage: TokenUsage


class BackendError(Exception):
    """Any failure of a backend call; never a truncated success."""


class AuthFailed(BackendError):
    pass


class RateLimited(BackendError):
    pass


class MalformedResponse(BackendError):
    pass


class TransportError(BackendError):
    pass


class RequestRejected(BackendError):
    """A 4xx other than 401/403/429; not retried."""

    def __init__(self, status: int, body: str = ""):
        super().__init__(f"request rejected with HTTP {status}: {body[:200]}")
        self.status = status


class ChatBackend(Protocol):
    name: str

    def complete(self, messages: Sequence[Message]) -> BackendReply: ...


def estimate_usage(messages: Sequence[Message], reply: str) -> TokenUsage:
    """Rough ``ceil(chars / 4)`` token estimate, flagged as estimated."""
    chars = sum(len(m.content) for m in messages)
    return TokenUsage(math.ceil(chars / 4), math.ceil(len(reply) / 4), estimated=True)


# --- OpenAI-compatible HTTP client -----------------------------------------------

@dataclass
class HttpEndpoint:
    base_url: str
    api_key: str
    model: str
    params: dict[str, Any] = field(default_factory=dict)
    timeout: float = 120.0
    max_attempts: int = 5
    backoff_base: float = 1.0
    backoff_factor: float = 2.0

    @classmethod
    def from_env(cls, vision: bool = False, **kw) -> HttpEndpoint:
        key = os.environ.get("SEEKLOOP_API_KEY")
        if not key:
            raise AuthFailed("SEEKLOOP_API_KEY is not set")
        base = os.environ.get("SEEKLOOP_API_BASE", "https://api.openai.com/v1")
        model = os.environ.get("SEEKLOOP_MODEL", "gpt-5")
        if vision:
            model = os.environ.get("SEEKLOOP_VISION_MODEL", model)
        return cls(base_url=base, api_key=key, model=model, **kw)


def _wire_message(m: Message) -> dict[str, Any]:
    if not m.images:
        return {"role": m.role, "content": m.content}
    content = []
    for p in m.parts:
        if isinstance(p, Text):
            content.append({"type": "text", "text": p.text})
        else:
            b64 = base64.b64encode(p.frame.data).decode("ascii")
            content.append({"type": "text", "text": f"Frame at t={p.label:.1f}s:"})
            content.append(
                {"type": "image_url", "image_url": {"url": f"data:{p.frame.mime};base64,{b64}"}}
            )
    return {"role": m.role, "content": content}


def _parse_completion(body: Any, messages: Sequence[Message]) -> BackendReply:
    try:
        text = body["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as e:
        raise MalformedResponse(f"response lacks choices[0].message.content: {e!r}") from e
    if isinstance(text, list):
        text = "".join(part.get("text", "") for part in text if isinstance(part, dict))
    if not isinstance(text, str):
        raise MalformedResponse("message content is not text")
    usage = body.get("usage") if isinstance(body, dict) else None
    if isinstance(usage, dict) and "prompt_tokens" in usage and "completion_tokens" in usage:
        return BackendReply(text, TokenUsage(int(usage["prompt_tokens"]), int(usage["completion_tokens"])))
    return BackendReply(text, estimate_usage(messages, text))


def http_chat_complete(
    endpoint: HttpEndpoint,
    messages: Sequence[Message],
    client: Optional[httpx.Client] = None,
    sleep: Callable[[float], None] = time.sleep,
) -> BackendReply:
    """POST to ``{base_url}/chat/completions``; retries transport errors, 429 and 5xx."""
    url = endpoint.base_url.rstrip("/") + "/chat/completions"
    payload = {"model": endpoint.model, "messages": [_wire_message(m) for m in messages], **endpoint.params}
    headers = {"Authorization": f"Bearer {endpoint.api_key}"}
    own = client is None
    client = client or httpx.Client(timeout=endpoint.timeout)
    try:
        last: BackendError = TransportError("no attempt made")
        for attempt in range(endpoint.max_attempts):
            if attempt:
                sleep(endpoint.backoff_base * endpoint.backoff_factor ** (attempt - 1))
            try:
                resp = client.post(url, json=payload, headers=headers)
            except httpx.TransportError as e:
                last = TransportError(f"{type(e).__name__}: {e}")
                continue
            status = resp.status_code
            if status in (401, 403):
                raise AuthFailed(f"HTTP {status}: {resp.text[:200]}")
            if status == 429:
                last = RateLimited(f"HTTP 429 after {attempt + 1} attempts")
                continue
            if status >= 500:
                last = TransportError(f"HTTP {status}: {resp.text[:200]}")
                continue
            if status >= 400:
                raise RequestRejected(status, resp.text)
            try:
                body = resp.json()
            except (json.JSONDecodeError, ValueError) as e:
                raise MalformedResponse(f"response is not JSON: {e}") from e
            return _parse_completion(body, messages)
        raise last
    finally:
        if own:
            client.close()


class HttpChatBackend:
    def __init__(self, endpoint: HttpEndpoint, sleep: Callable[[float], None] = time.sleep):
        self.endpoint = endpoint
        self.name = f"http:{endpoint.model}"
        self._client = httpx.Client(timeout=endpoint.timeout)
        self._sleep = sleep

    def complete(self, messages: Sequence[Message]) -> BackendReply:
        return http_chat_complete(self.endpoint, messages, self._client, self._sleep)

    def close(self):
        self._client.close()


# --- deterministic backends ------------------------------------------------------

UNKNOWN_ANSWER = "Answer: UNKNOWN"


class ScriptedThinker:
    """Replays canned replies in order, then answers ``UNKNOWN``.

    Every prompt it receives is recorded in ``prompts``. Bound to one episode.
    """

    def __init__(self, script: Sequence[str], name: str = "scripted"):
        if not script:
            raise ValueError("script must be non-empty")
        self.script = list(script)
        self.name = name
        self.prompts: list[tuple[Message, ...]] = []

    def complete(self, messages: Sequence[Message]) -> BackendReply:
        self.prompts.append(tuple(messages))
        i = len(self.prompts) - 1
        text = self.script[i] if i < len(self.script) else UNKNOWN_ANSWER
        return BackendReply(text, estimate_usage(messages, text))


def scripted_thinker(script: Sequence[str]) -> ScriptedThinker:
    return ScriptedThinker(script)


class StaticVision:
    """Stub vision backend that names each frame it was shown."""

    name = "static-vision"

    def complete(self, messages: Sequence[Message]) -> BackendReply:
        stamps = [img.label for m in messages for img in m.images]
        text = " ".join(f"t={t:.1f}: frame." for t in stamps) or "no frames."
        return BackendReply(text, estimate_usage(messages, text))


class SerializedBackend:
    """Wraps a backend that is not safe for concurrent use behind a lock."""

    def __init__(self, inner: ChatBackend):
        self.inner = inner
        self.name = inner.name
        self._lock = threading.Lock()

    def complete(self, messages: Sequence[Message]) -> BackendReply:
        with self._lock:
            return self.inner.complete(messages)


def oracle_vision(world) -> ChatBackend:
    """Deterministic vision backend describing a synthetic world (see ``synthworld``)."""
    from .synthworld import OracleVision

    return OracleVision(world)
