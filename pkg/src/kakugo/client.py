"""OpenAI-compatible chat-completion client.

Endpoint-agnostic: any server speaking the chat-completions JSON schema
works. Adds bounded-concurrency batching, retry with exponential backoff,
a persistent response cache keyed on the full request, and separation of
the reasoning trace from the final answer.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import httpx

from .errors import AuthError, KakugoError, MalformedResponse, RateLimited, TransportError

logger = logging.getLogger(__name__)

_ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class ChatRequest:
    """One chat-completion request.

    ``extra_params`` carries endpoint-specific sampling knobs (e.g.
    repetition_penalty) that are sent verbatim in the JSON payload and
    participate in the cache key.
    """

    model_id: str
    messages: Tuple[Tuple[str, str], ...]
    temperature: float = 0.7
    max_tokens: Optional[int] = None
    extra_params: Tuple[Tuple[str, object], ...] = ()

    @classmethod
    def build(
        cls,
        model_id: str,
        messages: Sequence[Tuple[str, str]],
        temperature: float = 0.7,
        max_tokens: Optional[int] = None,
        **extra_params: object,
    ) -> "ChatRequest":
        return cls(
            model_id=model_id,
            messages=tuple((role, content) for role, content in messages),
            temperature=temperature,
            max_tokens=max_tokens,
            extra_params=tuple(sorted(extra_params.items())),
        )

    def validate(self) -> None:
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens is not None and self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")
        for i, (role, _content) in enumerate(self.messages):
            if role not in _ROLES:
                raise ValueError(f"unknown role {role!r} at position {i}")
            if role == "system" and i != 0:
                raise ValueError("system message only allowed at position 0")
        # After an optional leading system message, roles must alternate
        # user/assistant starting with user.
        tail = [role for role, _ in self.messages if role != "system"]
        for i, role in enumerate(tail):
            expected = "user" if i % 2 == 0 else "assistant"
            if role != expected:
                raise ValueError(f"roles must alternate user/assistant; got {role!r} at turn {i}")

    def cache_key(self) -> str:
        payload = json.dumps(
            {
                "model_id": self.model_id,
                "messages": list(self.messages),
                "temperature": self.temperature,
                "max_tokens": self.max_tokens,
                "extra_params": list(self.extra_params),
            },
            sort_keys=True,
            ensure_ascii=False,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def to_payload(self) -> dict:
        body: dict = {
            "model": self.model_id,
            "messages": [{"role": role, "content": content} for role, content in self.messages],
            "temperature": self.temperature,
        }
        if self.max_tokens is not None:
            body["max_tokens"] = self.max_tokens
        body.update(dict(self.extra_params))
        return body


@dataclass
class ChatResponse:
    final_text: str
    reasoning_text: str = ""
    usage: Tuple[int, int] = (0, 0)
    raw_payload: bytes = b""

    def to_json(self) -> dict:
        return {
            "final_text": self.final_text,
            "reasoning_text": self.reasoning_text,
            "usage": list(self.usage),
            "raw_payload": base64.b64encode(self.raw_payload).decode("ascii"),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ChatResponse":
        return cls(
            final_text=obj["final_text"],
            reasoning_text=obj.get("reasoning_text", ""),
            usage=tuple(obj.get("usage", (0, 0))),
            raw_payload=base64.b64decode(obj.get("raw_payload", "")),
        )


class ResponseCache:
    """Append-only JSONL cache of (key, response) records.

    Appends are single ``write`` calls on an O_APPEND descriptor, so
    concurrent writers from batch workers interleave whole lines.
    """

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._entries: Dict[str, ChatResponse] = {}
        self.hits = 0
        self.misses = 0
        if self.path.exists():
            with self.path.open("r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        record = json.loads(line)
                        self._entries[record["key"]] = ChatResponse.from_json(record["response"])
                    except (ValueError, KeyError):
                        logger.warning("skipping corrupt cache line in %s", self.path)
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: str) -> Optional[ChatResponse]:
        with self._lock:
            response = self._entries.get(key)
            if response is not None:
                self.hits += 1
            else:
                self.misses += 1
            return response

    def put(self, key: str, response: ChatResponse) -> None:
        line = json.dumps({"key": key, "response": response.to_json()}, ensure_ascii=False) + "\n"
        data = line.encode("utf-8")
        with self._lock:
            self._entries[key] = response
            fd = os.open(self.path, os.O_WRONLY | os.O_CREAT | os.O_APPEND, 0o644)
            try:
                os.write(fd, data)
            finally:
                os.close(fd)

    def hit_rate(self) -> float:
        total = self.hits + self.misses
        return self.hits / total if total else 0.0


def extract_reasoning(
    content: str, markers: Tuple[str, str] = ("<think>", "</think>")
) -> Tuple[str, str]:
    """Split a leading delimited reasoning block off assistant content.

    Returns (reasoning, final). When no leading block is present the
    content is returned unchanged with empty reasoning.
    """
    open_mark, close_mark = markers
    stripped = content.lstrip()
    if stripped.startswith(open_mark):
        end = stripped.find(close_mark, len(open_mark))
        if end != -1:
            reasoning = stripped[len(open_mark):end].strip()
            final = stripped[end + len(close_mark):].lstrip()
            return reasoning, final
    return "", content


@dataclass
class TeacherClient:
    """Client for one OpenAI-compatible endpoint.

    ``transport`` lets tests inject an ``httpx`` mock transport;
    ``offline`` serves only from cache and treats misses as transport
    failures (used by reproducibility audits).
    """

    base_url: str = "http://localhost:8000"
    completion_path: str = "/v1/chat/completions"
    api_key_env: str = "KAKUGO_API_KEY"
    cache: Optional[ResponseCache] = None
    max_attempts: int = 3
    backoff_base: float = 0.5
    backoff_cap: float = 8.0
    timeout: float = 120.0
    reasoning_markers: Tuple[str, str] = ("<think>", "</think>")
    offline: bool = False
    transport: Optional[httpx.BaseTransport] = None
    _http: Optional[httpx.Client] = field(default=None, repr=False)
    _rng: random.Random = field(default_factory=random.Random, repr=False)

    def _client(self) -> httpx.Client:
        if self._http is None:
            headers = {}
            api_key = os.environ.get(self.api_key_env)
            if api_key:
                headers["Authorization"] = f"Bearer {api_key}"
            self._http = httpx.Client(
                base_url=self.base_url,
                headers=headers,
                timeout=self.timeout,
                transport=self.transport,
            )
        return self._http

    def close(self) -> None:
        if self._http is not None:
            self._http.close()
            self._http = None

    def complete(self, request: ChatRequest, refresh: bool = False) -> ChatResponse:
        """Return the (possibly cached) response for one request.

        ``refresh`` bypasses the cache read and overwrites the entry,
        used when a cached response failed downstream parsing.
        """
        request.validate()
        key = request.cache_key()
        if self.cache is not None and not refresh:
            cached = self.cache.get(key)
            if cached is not None:
                return cached
        if self.offline:
            raise TransportError(f"cache miss in offline mode for key {key[:12]}")
        response = self._complete_http(request)
        if self.cache is not None:
            self.cache.put(key, response)
        return response

    def _complete_http(self, request: ChatRequest) -> ChatResponse:
        last_error: Optional[Exception] = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                http_response = self._client().post(self.completion_path, json=request.to_payload())
            except httpx.HTTPError as exc:
                last_error = TransportError(f"transport failure: {exc}")
            else:
                status = http_response.status_code
                if status == 200:
                    return self._parse_response(http_response.content)
                if status in (401, 403):
                    raise AuthError(f"endpoint returned {status}")
                if status == 429:
                    last_error = RateLimited("rate limited (429)")
                elif status >= 500:
                    last_error = TransportError(f"server error {status}")
                else:
                    raise TransportError(f"unexpected status {status}")
            if attempt < self.max_attempts:
                delay = min(self.backoff_cap, self.backoff_base * 2 ** (attempt - 1))
                time.sleep(delay * self._rng.uniform(0.5, 1.0))
        assert last_error is not None
        raise last_error

    def _parse_response(self, body: bytes) -> ChatResponse:
        try:
            payload = json.loads(body)
            choice = payload["choices"][0]
            message = choice["message"]
            content = message.get("content") or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse(f"unparseable completion body: {exc}")
        reasoning = message.get("reasoning_content") or message.get("reasoning") or ""
        if not reasoning:
            reasoning, content = extract_reasoning(content, self.reasoning_markers)
        usage = payload.get("usage") or {}
        return ChatResponse(
            final_text=content,
            reasoning_text=reasoning,
            usage=(int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0))),
            raw_payload=bytes(body),
        )

    def complete_batch(
        self,
        requests: Sequence[ChatRequest],
        max_in_flight: int = 8,
        refresh: bool = False,
    ) -> List[Union[ChatResponse, KakugoError]]:
        """Run requests with at most ``max_in_flight`` outstanding at once.

        Results are positional: slot i holds the response (or the error)
        for request i. Per-slot failures never abort the batch.
        """
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if not requests:
            return []

        def run_one(request: ChatRequest) -> Union[ChatResponse, KakugoError]:
            try:
                return self.complete(request, refresh=refresh)
            except KakugoError as exc:
                return exc
            except ValueError as exc:
                return MalformedResponse(str(exc))

        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            return list(pool.map(run_one, requests))
