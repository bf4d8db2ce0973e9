"""Scripted mock teacher shared across the test suite.

The mock speaks the chat-completions JSON schema over an in-process
httpx transport. Its outputs are pure functions of the request, so
pipelines driven by it are fully deterministic.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading

import httpx
import pytest

from kakugo.client import ResponseCache, TeacherClient


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:8]


class MockTeacher:
    """Deterministic OpenAI-compatible endpoint for tests.

    Saturates every list request by default; ``list_counts`` can force
    fewer items per matching substring, ``fail_if`` can fail whole
    requests, and ``garble_if`` returns unparseable prose.
    """

    def __init__(self):
        self.requests: list[dict] = []
        self.active = 0
        self.peak_active = 0
        self._lock = threading.Lock()
        self.list_counts: dict[str, int] = {}
        self.fail_if = None  # callable(payload) -> Optional[int status]
        self.garble_if = None  # callable(payload) -> bool
        self.translation_value = lambda value: f"[xx] {value}"
        self.response_text = None  # callable(user) -> str override

    # -- transport --------------------------------------------------------

    def transport(self) -> httpx.MockTransport:
        return httpx.MockTransport(self._handle)

    def _handle(self, request: httpx.Request) -> httpx.Response:
        payload = json.loads(request.content)
        with self._lock:
            self.requests.append(payload)
            self.active += 1
            self.peak_active = max(self.peak_active, self.active)
        try:
            if self.fail_if is not None:
                status = self.fail_if(payload)
                if status:
                    return httpx.Response(status, json={"error": "scripted failure"})
            if self.garble_if is not None and self.garble_if(payload):
                return self._completion("I would rather chat about the weather.")
            return self._reply(payload)
        finally:
            with self._lock:
                self.active -= 1

    @staticmethod
    def _completion(content: str, reasoning: str | None = None) -> httpx.Response:
        message = {"role": "assistant", "content": content}
        if reasoning is not None:
            message["reasoning_content"] = reasoning
        return httpx.Response(
            200,
            json={
                "choices": [{"message": message}],
                "usage": {"prompt_tokens": 7, "completion_tokens": 11},
            },
        )

    # -- scripted behaviors ----------------------------------------------

    def _reply(self, payload: dict) -> httpx.Response:
        system = next((m["content"] for m in payload["messages"] if m["role"] == "system"), "")
        user = next((m["content"] for m in payload["messages"] if m["role"] == "user"), "")
        if '"topics"' in system:
            return self._list_reply(user, key="topics")
        if '"prompts"' in system:
            return self._list_reply(user, key="prompts")
        if '"improved_prompt"' in system:
            improved = f"Improved ({_digest(user)}): {user}"
            return self._completion(f"```json\n{json.dumps({'improved_prompt': improved})}\n```")
        if "translation assistant" in system:
            conversation = json.loads(user)
            translated = [
                {"from": turn["from"], "value": self.translation_value(turn["value"])}
                for turn in conversation
            ]
            return self._completion(json.dumps(translated, ensure_ascii=False))
        # Everything else is treated as a response-generation request.
        if self.response_text is not None:
            return self._completion(self.response_text(user))
        tag = _digest(system + user)
        return self._completion(f"Answer {tag} to: {user[:60]}", reasoning=f"Reasoning {tag}")

    def _requested_count(self, user: str) -> int:
        match = re.search(r"at most (\d+)", user) or re.search(r"(\d+)", user)
        return int(match.group(1)) if match else 3

    def _list_reply(self, user: str, key: str) -> httpx.Response:
        count = self._requested_count(user)
        for needle, forced in self.list_counts.items():
            if needle in user:
                count = forced
                break
        tag = _digest(user)
        items = [f"{key[:-1]} {tag} #{i}" for i in range(count)]
        return self._completion(f"Sure! Here you go:\n```json\n{json.dumps({key: items})}\n```")


@pytest.fixture
def teacher() -> MockTeacher:
    return MockTeacher()


@pytest.fixture
def client(teacher, tmp_path) -> TeacherClient:
    return TeacherClient(
        base_url="http://mock",
        cache=ResponseCache(tmp_path / "cache" / "responses.jsonl"),
        transport=teacher.transport(),
        backoff_base=0.001,
        backoff_cap=0.002,
    )


@pytest.fixture
def uncached_client(teacher) -> TeacherClient:
    return TeacherClient(
        base_url="http://mock",
        transport=teacher.transport(),
        backoff_base=0.001,
        backoff_cap=0.002,
    )
