"""
Background Tasks

Per-environment jobs that can run in-process or on RQ workers. Job
functions take and return plain dictionaries so they pickle cleanly; the
in-process helpers they wrap are what the CLI calls directly when the pool
shares memory.

Usage:
    pool = create_pool(workers=4, redis_url="redis://localhost:6379/0")
    results = pool.map_ordered(train_environment_job, payloads)
"""

from __future__ import annotations

import logging
from typing import Any, Dict, List, Optional

from .schemas import TrainConfig
from .services.agent import train_ladder
from .services.noise_model import GaussianNsd, environments_from_records
from .services.oracle import oracle
from .services.sequences import segments_for_time
from .services.spectral import FrequencyGrid, QuadratureSettings, TransformCache, TransformKey, cache_load

logger = logging.getLogger(__name__)

CacheEntry = tuple[int, int, float, float, float, float, float]


def _job_label() -> str:
    try:
        from rq import get_current_job
    except ImportError:  # pragma: no cover - optional dependency guard
        return "local"
    job = get_current_job()
    return job.id if job is not None else "local"


def train_environment(
    env_index: int,
    nsd: GaussianNsd,
    max_time: float,
    config: TrainConfig,
    grid: FrequencyGrid,
    cache: TransformCache,
    *,
    with_episodes: bool = False,
) -> List[Dict[str, Any]]:
    """Warm-started ladder to ``max_time`` for one environment, seeded ``config.seed + env_index``.

    With ``with_episodes`` each record also carries its per-episode rows under ``episode_log``.
    """

    seeded = config.model_copy(update={"seed": config.seed + env_index})
    results = train_ladder(seeded, nsd, max_time, cache, grid=grid)
    records = []
    for result in results:
        record = result.to_record(env_index).model_dump()
        if with_episodes:
            record["episode_log"] = [list(row) for row in result.episode_rows(env_index)]
        records.append(record)
    logger.info(
        "Environment %d trained to T=%s: coherence %.6f", env_index, max_time, records[-1]["coherence"] if records else 1.0
    )
    return records


def oracle_environment(
    env_index: int,
    nsd: GaussianNsd,
    max_time: float,
    options: Dict[str, Any],
    grid: FrequencyGrid,
    cache: TransformCache,
    *,
    ladder: bool = False,
) -> List[Dict[str, Any]]:
    delta_t = options.get("delta_t", 4.0)
    max_n = segments_for_time(max_time, delta_t)
    counts = range(1, max_n + 1) if ladder else [max_n]
    return [oracle(nsd, n, cache, grid=grid, **options).to_record(env_index).model_dump() for n in counts]


def _job_context(payload: Dict[str, Any]) -> tuple[GaussianNsd, FrequencyGrid, TransformCache, set]:
    nsd = environments_from_records([payload["environment"]])[0]
    grid = FrequencyGrid(**payload["grid"])
    quadrature = QuadratureSettings(**payload["quadrature"])
    cache_path: Optional[str] = payload.get("cache_path")
    if cache_path:
        cache = cache_load(cache_path, create_if_absent=True, quadrature=quadrature)
    else:
        cache = TransformCache(quadrature)
    known = {(key.signature, key.omega) for key, _ in cache.items()}
    return nsd, grid, cache, known


def _new_entries(cache: TransformCache, known: set) -> List[CacheEntry]:
    return [
        (int(key.kind), key.n_pulses, key.t_start, key.t_end, key.omega, value.real, value.imag)
        for key, value in cache.items()
        if (key.signature, key.omega) not in known
    ]


def train_environment_job(payload: Dict[str, Any]) -> Dict[str, Any]:
    """
    RQ job: train one environment.

    Payload keys: ``env_index``, ``environment`` (record), ``max_time``,
    ``config`` (TrainConfig fields), ``grid``, ``quadrature`` and optional
    ``cache_path`` (read-only seed cache). Returns the train records plus the
    transform entries computed by this job so the caller can merge them.
    """
    label = _job_label()
    env_index = int(payload["env_index"])
    logger.info("[Job %s] Training environment %d", label, env_index)
    try:
        nsd, grid, cache, known = _job_context(payload)
        records = train_environment(
            env_index,
            nsd,
            float(payload["max_time"]),
            TrainConfig(**payload["config"]),
            grid,
            cache,
            with_episodes=bool(payload.get("with_episodes", False)),
        )
        return {"env_index": env_index, "records": records, "entries": _new_entries(cache, known)}
    except Exception as exc:
        logger.error("[Job %s] Training environment %d failed: %s", label, env_index, exc)
        raise


def oracle_environment_job(payload: Dict[str, Any]) -> Dict[str, Any]:
    """RQ job: oracle search for one environment (same payload shape plus ``options`` and ``ladder``)."""
    label = _job_label()
    env_index = int(payload["env_index"])
    logger.info("[Job %s] Oracle for environment %d", label, env_index)
    try:
        nsd, grid, cache, known = _job_context(payload)
        records = oracle_environment(
            env_index,
            nsd,
            float(payload["max_time"]),
            dict(payload["options"]),
            grid,
            cache,
            ladder=bool(payload.get("ladder", False)),
        )
        return {"env_index": env_index, "records": records, "entries": _new_entries(cache, known)}
    except Exception as exc:
        logger.error("[Job %s] Oracle for environment %d failed: %s", label, env_index, exc)
        raise


def merge_entries(cache: TransformCache, entries: List[CacheEntry]) -> int:
    """Fold entries returned by a worker into ``cache``; returns how many were new."""

    incoming = TransformCache(cache.quadrature)
    for kind, n_pulses, t_start, t_end, omega, real, imag in entries:
        incoming.put(TransformKey(kind, n_pulses, t_start, t_end, omega), complex(real, imag))
    return cache.merge(incoming)
