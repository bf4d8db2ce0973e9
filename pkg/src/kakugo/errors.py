"""Exception types shared across the pipeline."""


class KakugoError(Exception):
    """Base class for all pipeline errors."""


class TransportError(KakugoError):
    """Network failure or 5xx after retries were exhausted."""


class RateLimited(TransportError):
    """HTTP 429 after retries were exhausted."""


class AuthError(KakugoError):
    """HTTP 401/403. Never retried."""


class MalformedResponse(KakugoError):
    """Endpoint body could not be parsed as a chat-completion payload."""


class GenerationParseError(KakugoError):
    """No usable JSON block could be extracted from a teacher response."""


class CorpusUnavailable(KakugoError):
    """Corpus path missing or unreadable."""


class EmptyCorpus(KakugoError):
    """No documents matched the requested language."""


class BudgetInfeasible(KakugoError):
    """A subset's source pool holds fewer tokens than the computed cap."""


class ExportIOError(KakugoError):
    """Failed to read or write a dataset artifact."""


class DataUnavailable(KakugoError):
    """Benchmark file missing or empty."""


class SchemaError(KakugoError):
    """Benchmark or dataset file does not match its documented schema."""


class TooFewItems(KakugoError):
    """Not enough benchmark items to reserve few-shot exemplars."""


class StageFailure(KakugoError):
    """A pipeline stage aborted; the manifest reflects completed stages."""
