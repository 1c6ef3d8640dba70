"""Exception hierarchy shared by every founderfit module."""

from __future__ import annotations


class FounderFitError(Exception):
    """Base class for all package errors."""


class ConfigError(FounderFitError):
    pass


# ingestion

class MissingColumn(FounderFitError):
    def __init__(self, path, column: str):
        super().__init__(f"{path}: header lacks required column {column!r}")
        self.path = path
        self.column = column


class DuplicateId(FounderFitError):
    def __init__(self, path, record_id: str):
        super().__init__(f"{path}: duplicate id {record_id!r}")
        self.path = path
        self.record_id = record_id


class ProfileParseError(FounderFitError):
    pass


# embeddings and index

class EmptyText(FounderFitError, ValueError):
    pass


class ProviderUnavailable(FounderFitError):
    def __init__(self, message: str, missing: list[str] | None = None):
        super().__init__(message)
        self.missing = list(missing or [])


class DimensionMismatch(FounderFitError, ValueError):
    pass


class ZeroVector(FounderFitError, ValueError):
    pass


class EmptyClass(FounderFitError):
    pass


class VersionMismatch(FounderFitError):
    pass


class CorruptFile(FounderFitError):
    pass


class ScoreOutOfBounds(FounderFitError):
    pass


# llm gateway

class BackendUnavailable(FounderFitError):
    pass


class TransientBackendError(BackendUnavailable):
    """Retryable failure (timeouts, 5xx, rate limits)."""


class ResponseTooLong(FounderFitError):
    pass


class ReplayExhausted(BackendUnavailable):
    def __init__(self, tag: str):
        super().__init__(f"replay has no remaining exchange for stage {tag!r}")
        self.tag = tag


class ReplayMismatch(FounderFitError):
    def __init__(self, tag: str, diff: str):
        super().__init__(f"request for stage {tag!r} differs from recording:\n{diff}")
        self.tag = tag
        self.diff = diff


# parsing

class ParseError(FounderFitError):
    pass


class NoListFound(ParseError):
    pass


class FeatureCountOutOfRange(ParseError):
    def __init__(self, count: int, lo: int, hi: int):
        super().__init__(f"parsed {count} features, expected {lo}..{hi}")
        self.count = count


class MissingExpert(ParseError):
    pass


class ValueOutOfRange(ParseError):
    pass


class NoScoreFound(ParseError):
    pass


# pipeline, scoring, reports

class EmptyPanel(FounderFitError, ValueError):
    pass


class InputOutOfRange(FounderFitError, ValueError):
    pass


class SchemaVersionMismatch(FounderFitError):
    pass


class PipelineStageError(FounderFitError):
    """Wraps any failure inside the evaluation pipeline with its stage tag."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
