"""Error types and helpers for consistent, machine-parsable error reporting."""

from __future__ import annotations

from typing import Any, Iterable

from pydantic import ValidationError


ERROR_PREFIX = "ddforge:error"

_ERROR_HINTS: dict[str, str] = {
    "domain_error": "Check that frequencies, times and noise parameters lie in their valid ranges.",
    "config_error": "Review the named configuration field and the command-line overrides.",
    "cache_format": "Delete or regenerate the transform cache file; it was not written by this version.",
    "cache_missing": "Pass --create-cache to start from an empty transform cache.",
    "filter_blind": "Choose a different target frequency or sequence; this one has no response there.",
    "oracle_limit": "Use --mode incremental for sequences longer than the exhaustive limit.",
    "precondition": "The inputs do not satisfy the operation's preconditions.",
    "missing_keys": "Provide results for every (environment, T) pair present in the reference set.",
    "usage": "Run with --help to see the accepted arguments.",
    "worker_job": "Inspect the failed job with `rq info` or rerun without redis_url to use threads.",
}


class DdforgeError(Exception):
    """Base class for all errors raised by ddforge."""

    code = "ddforge_error"
    exit_code = 1


class DomainError(DdforgeError, ValueError):
    """Raised when an argument lies outside the mathematical domain of an operation."""

    code = "domain_error"


class ConfigError(DdforgeError, ValueError):
    """Raised for invalid configuration; the message names the offending field."""

    code = "config_error"
    exit_code = 2

    def __init__(self, message: str, *, field: str | None = None) -> None:
        super().__init__(message)
        self.field = field


class CacheFormatError(DdforgeError):
    """Raised when a transform cache file cannot be parsed."""

    code = "cache_format"

    def __init__(self, message: str, *, line_number: int | None = None, record: str | None = None) -> None:
        super().__init__(message)
        self.line_number = line_number
        self.record = record


class CacheMissingError(DdforgeError, FileNotFoundError):
    code = "cache_missing"


class FilterBlindError(DdforgeError):
    """Raised when a sequence has (numerically) no response at the target frequency."""

    code = "filter_blind"


class OracleLimitError(DdforgeError):
    code = "oracle_limit"


class PreconditionError(DdforgeError, ValueError):
    code = "precondition"


class MissingKeysError(DdforgeError, KeyError):
    """Raised when result sets do not cover the same (environment, T) keys."""

    code = "missing_keys"

    def __init__(self, missing: Iterable[Any]) -> None:
        self.missing = sorted(missing)
        super().__init__(f"missing result keys: {self.missing}")

    def __str__(self) -> str:
        return f"missing result keys: {self.missing}"


class UsageError(DdforgeError):
    code = "usage"
    exit_code = 2


def config_error_from_validation(exc: ValidationError, *, prefix: str | None = None) -> ConfigError:
    """Convert a pydantic validation failure into a ConfigError naming the first bad field."""

    errors = exc.errors()
    if not errors:
        return ConfigError(str(exc))
    first = errors[0]
    location = ".".join(str(part) for part in first.get("loc", ()) if part != "__root__")
    if prefix:
        location = f"{prefix}.{location}" if location else prefix
    message = first.get("msg") or "invalid value"
    return ConfigError(f"{location}: {message}" if location else message, field=location or None)


def build_error_payload(exc: BaseException) -> dict[str, Any]:
    """Create a structured error payload with a helpful hint when available."""

    code = getattr(exc, "code", "internal_error")
    payload: dict[str, Any] = {"code": code, "message": str(exc) or exc.__class__.__name__}
    hint = _ERROR_HINTS.get(code)
    if hint:
        payload["hint"] = hint
    field = getattr(exc, "field", None)
    if field:
        payload["field"] = field
    return payload


def format_error_line(exc: BaseException) -> str:
    """Render an error as a single stable line: ``ddforge:error:<code>: <message>``."""

    payload = build_error_payload(exc)
    message = " ".join(payload["message"].split())
    return f"{ERROR_PREFIX}:{payload['code']}: {message}"
