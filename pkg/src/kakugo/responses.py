"""Turn generated prompts into single-turn training conversations.

Each prompt is answered by the teacher under the response system
message; the teacher's reasoning trace, when present, is captured
verbatim alongside the final answer.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

from .client import ChatRequest, TeacherClient
from .errors import AuthError, KakugoError
from .prompts import GenerationSettings, PromptRecord
from .templates import load_template
from .types import GENERATED, THINKING, ConversationExample

logger = logging.getLogger(__name__)


@dataclass
class ResponseStats:
    requested: int = 0
    produced: int = 0
    dropped: int = 0


class ResponseGenerator:
    def __init__(self, client: TeacherClient, settings: Optional[GenerationSettings] = None):
        self.client = client
        self.settings = settings or GenerationSettings()
        self.stats = ResponseStats()

    def generate_responses(
        self, prompts: Sequence[PromptRecord], language_name: str
    ) -> List[ConversationExample]:
        """One teacher call per prompt; empty answers retried once, then dropped."""
        s = self.settings
        system = load_template("response_system.txt", s.resource_dir).format(lang_name=language_name)
        requests = [
            ChatRequest.build(
                model_id=s.model_id,
                messages=[("system", system), ("user", record.prompt_text)],
                temperature=s.temperature,
            )
            for record in prompts
        ]
        self.stats.requested += len(requests)
        examples: List[ConversationExample] = []
        responses = self.client.complete_batch(requests, max_in_flight=s.max_in_flight)
        retry_slots = [
            i
            for i, r in enumerate(responses)
            if isinstance(r, KakugoError) or not r.final_text.strip()
        ]
        if retry_slots:
            for i, retried in zip(
                retry_slots,
                self.client.complete_batch(
                    [requests[i] for i in retry_slots], max_in_flight=s.max_in_flight, refresh=True
                ),
            ):
                responses[i] = retried
        for i, (record, response) in enumerate(zip(prompts, responses)):
            if isinstance(response, AuthError):
                raise response
            if isinstance(response, KakugoError) or not response.final_text.strip():
                self.stats.dropped += 1
                continue
            examples.append(
                ConversationExample(
                    turns=[("user", record.prompt_text), ("assistant", response.final_text)],
                    origin=GENERATED,
                    system_mode=THINKING,
                    source_id=f"{record.method}/{record.lineage}/{i}",
                    reasoning_trace=response.reasoning_text or None,
                    method=record.method,
                )
            )
        self.stats.produced += len(examples)
        return examples
