"""
Monitoring & Observability

Prometheus metrics for the numerical pipeline and optional Sentry error
tracking for long batch runs.

Features:
- Transform-cache hit/miss counters
- Coherence, episode, oracle-candidate and fit-evaluation counters
- Training duration histogram
"""

import functools
import logging
import time
from typing import Any, Callable, TypeVar

import sentry_sdk
from prometheus_client import Counter, Histogram, generate_latest

logger = logging.getLogger(__name__)

F = TypeVar("F", bound=Callable[..., Any])


# Prometheus Metrics
# ==================

TRANSFORM_LOOKUPS = Counter(
    "ddforge_transform_lookups_total",
    "Segment transform lookups by outcome",
    ["result"],
)

COHERENCE_EVALUATIONS = Counter(
    "ddforge_coherence_evaluations_total",
    "Decoherence integrals evaluated",
)

EPISODES = Counter(
    "ddforge_episodes_total",
    "Q-learning episodes completed",
)

ORACLE_CANDIDATES = Counter(
    "ddforge_oracle_candidates_total",
    "Candidate sequences scored by the brute-force oracle",
    ["mode"],
)

FIT_EVALUATIONS = Counter(
    "ddforge_fit_evaluations_total",
    "Objective evaluations during noise-spectrum fitting",
)

TRAIN_SECONDS = Histogram(
    "ddforge_train_seconds",
    "Wall time of one train() call in seconds",
    buckets=(0.1, 0.5, 1, 2, 5, 10, 30, 60, 120, 300, 600),
)


def init_sentry(dsn: str | None, environment: str = "batch") -> bool:
    """
    Initialize Sentry for error tracking.

    Call this once at CLI start-up. Returns ``True`` when Sentry was enabled.
    """
    if not dsn:
        logger.info("Sentry DSN not configured, skipping Sentry initialization")
        return False

    try:
        sentry_sdk.init(
            dsn=dsn,
            environment=environment,
            traces_sample_rate=0.0,
            send_default_pii=False,
            release=f"ddforge@{get_app_version()}",
        )
        logger.info("Sentry initialized: env=%s", environment)
        return True
    except Exception as exc:
        logger.error("Failed to initialize Sentry: %s", exc)
        return False


def get_app_version() -> str:
    """Get application version from package metadata."""
    try:
        from importlib.metadata import version

        return version("ddforge")
    except Exception:
        from . import __version__

        return __version__


def get_prometheus_metrics() -> bytes:
    """
    Get current Prometheus metrics.

    Returns:
        bytes: Prometheus metrics in text format
    """
    return generate_latest()


def track_duration(histogram: Histogram) -> Callable[[F], F]:
    """
    Decorator recording a function's wall time in ``histogram``.

    Usage:
        @track_duration(TRAIN_SECONDS)
        def train(...):
            ...
    """

    def decorator(func: F) -> F:
        @functools.wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            start = time.perf_counter()
            try:
                return func(*args, **kwargs)
            finally:
                histogram.observe(time.perf_counter() - start)

        return wrapper  # type: ignore[return-value]

    return decorator
