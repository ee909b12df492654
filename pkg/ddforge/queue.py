"""Worker pools for fanning per-environment work out, with Redis + RQ support and a thread fallback.

Every pool exposes ``map_ordered(fn, items)`` which returns results in input
order whatever order the jobs finish in. RQ jobs need ``fn`` to be an
importable module-level function (see :mod:`ddforge.tasks`).
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Iterable, List, Optional, TypeVar

from tenacity import before_sleep_log, retry, retry_if_exception_type, stop_after_attempt, wait_exponential

from .utils.errors import DdforgeError

logger = logging.getLogger(__name__)

QUEUE_NAME = "ddforge"

T = TypeVar("T")
R = TypeVar("R")

try:
    import redis
    from rq import Queue as RQQueue

    REDIS_AVAILABLE = True
except ImportError:  # pragma: no cover - optional dependency guard
    redis = None  # type: ignore[assignment]
    RQQueue = None  # type: ignore[assignment, misc]
    REDIS_AVAILABLE = False


class WorkerJobError(DdforgeError):
    code = "worker_job"


class ThreadPool:
    """In-process pool; jobs share memory (and therefore one transform cache)."""

    backend = "threads"
    in_process = True

    def __init__(self, workers: int = 1) -> None:
        self.workers = max(1, int(workers))

    def map_ordered(self, fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
        items = list(items)
        if self.workers == 1 or len(items) <= 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.workers, thread_name_prefix="ddforge-worker") as executor:
            return list(executor.map(fn, items))

    def stats(self) -> dict[str, Any]:
        return {"backend": self.backend, "workers": self.workers}

    def shutdown(self) -> None:
        return None


class RQPool:
    """Redis + RQ backed pool. Workers are started separately with ``python worker.py``."""

    backend = "redis + rq"
    in_process = False

    def __init__(
        self,
        redis_url: str,
        *,
        queue_name: str = QUEUE_NAME,
        job_timeout: str = "6h",
        poll_interval: float = 0.5,
    ) -> None:
        if not REDIS_AVAILABLE:
            raise RuntimeError("Redis and RQ are not installed. Install with: pip install redis rq")
        self._redis_url = redis_url
        self._queue_name = queue_name
        self._job_timeout = job_timeout
        self._poll_interval = poll_interval
        self._redis_client = self._connect()
        self._queue = RQQueue(queue_name, connection=self._redis_client)

    @retry(
        retry=retry_if_exception_type(Exception),
        stop=stop_after_attempt(3),
        wait=wait_exponential(multiplier=1, min=1, max=8),
        before_sleep=before_sleep_log(logger, logging.WARNING),
        reraise=True,
    )
    def _connect(self) -> "redis.Redis":
        client = redis.from_url(self._redis_url, socket_connect_timeout=5, socket_timeout=30)
        client.ping()
        logger.info("Connected to Redis at %s", self._redis_url.split("@")[-1])
        return client

    @property
    def workers(self) -> int:
        from rq import Worker

        return len(Worker.all(queue=self._queue))

    def map_ordered(self, fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
        jobs = [
            self._queue.enqueue(fn, item, job_timeout=self._job_timeout, result_ttl=3600, failure_ttl=86400)
            for item in items
        ]
        logger.info("Enqueued %d %s jobs on queue %s", len(jobs), getattr(fn, "__name__", "ddforge"), self._queue_name)
        pending = {job.id for job in jobs}
        while pending:
            for job in jobs:
                if job.id not in pending:
                    continue
                status = job.get_status(refresh=True)
                if status == "finished":
                    pending.discard(job.id)
                elif status in ("failed", "stopped", "canceled"):
                    raise WorkerJobError(f"job {job.id} {status}: {job.exc_info or 'no traceback recorded'}")
            if pending:
                time.sleep(self._poll_interval)
        return [job.return_value() for job in jobs]

    def stats(self) -> dict[str, Any]:
        return {
            "backend": self.backend,
            "queue": self._queue_name,
            "queued": len(self._queue),
            "workers": self.workers,
            "redis_url": self._redis_url.split("@")[-1],
        }

    def shutdown(self) -> None:
        self._redis_client.close()


Pool = ThreadPool | RQPool


def create_pool(workers: int = 1, redis_url: Optional[str] = None) -> Pool:
    """RQ pool when a Redis URL is configured and reachable, in-process threads otherwise."""

    if redis_url and REDIS_AVAILABLE:
        try:
            pool = RQPool(redis_url)
            logger.info("Using Redis + RQ worker pool (queue %s)", QUEUE_NAME)
            return pool
        except Exception as exc:
            logger.warning("Failed to initialize Redis pool: %s. Falling back to threads.", exc)
    elif redis_url:
        logger.warning("Redis/RQ not installed; ignoring redis_url and using threads")
    logger.info("Using in-process thread pool with %d worker(s)", max(1, workers))
    return ThreadPool(workers)
