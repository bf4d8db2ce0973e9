import pytest

from kakugo.errors import AuthError
from kakugo.prompts import GenerationSettings, PromptRecord
from kakugo.responses import ResponseGenerator
from kakugo.types import GENERATED, THINKING

LANG = "Javanese"


def _prompts(n=6):
    return [PromptRecord(f"prompt {i} about something", "topic", f"t/{i}") for i in range(n)]


def test_examples_capture_trace_and_modes(client):
    generator = ResponseGenerator(client)
    examples = generator.generate_responses(_prompts(), LANG)
    assert len(examples) == 6
    for record, example in zip(_prompts(), examples):
        assert example.origin == GENERATED
        assert example.system_mode == THINKING
        assert example.method == "topic"
        assert example.turns[0] == ("user", record.prompt_text)
        assert example.turns[1][0] == "assistant"
        assert example.reasoning_trace.startswith("Reasoning ")
    assert generator.stats.produced == 6
    assert generator.stats.dropped == 0


def test_missing_trace_stored_as_none(teacher, client):
    teacher.response_text = lambda user: "plain answer with no trace"
    examples = ResponseGenerator(client).generate_responses(_prompts(2), LANG)
    assert all(e.reasoning_trace is None for e in examples)


def test_empty_answer_retried_then_dropped(teacher, client):
    teacher.response_text = lambda user: "" if "prompt 2" in user else f"ok: {user}"
    generator = ResponseGenerator(client)
    examples = generator.generate_responses(_prompts(4), LANG)
    assert len(examples) == 3
    assert generator.stats.dropped == 1
    assert not any("prompt 2" in e.turns[0][1] for e in examples)
    # the empty slot was retried once with a cache bypass
    retried = [r for r in teacher.requests if "prompt 2" in r["messages"][-1]["content"]]
    assert len(retried) == 2


def test_transport_failure_retried_then_dropped(teacher, client):
    calls = []

    def fail_twice(payload):
        if "prompt 1" in payload["messages"][-1]["content"]:
            calls.append(None)
            return 503
        return None

    teacher.fail_if = fail_twice
    generator = ResponseGenerator(client)
    examples = generator.generate_responses(_prompts(3), LANG)
    assert len(examples) == 2
    assert generator.stats.dropped == 1


def test_auth_error_aborts(teacher, client):
    teacher.fail_if = lambda payload: 401
    with pytest.raises(AuthError):
        ResponseGenerator(client).generate_responses(_prompts(2), LANG)


def test_system_message_names_language(teacher, client):
    ResponseGenerator(client).generate_responses(_prompts(1), LANG)
    system = teacher.requests[0]["messages"][0]["content"]
    assert "Javanese" in system
    assert "helpful chatbot assistant" in system


def test_temperature_from_settings(teacher, client):
    settings = GenerationSettings(temperature=0.3)
    ResponseGenerator(client, settings).generate_responses(_prompts(1), LANG)
    assert teacher.requests[0]["temperature"] == 0.3
