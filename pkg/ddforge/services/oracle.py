"""Brute-force reference optimiser over segment choices.

Exhaustive mode scores all 4^N sequences. Incremental mode is a receding
horizon search: at each step it scores every depth-d extension of the
committed prefix and commits the first action of the best one.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

from ..monitoring import ORACLE_CANDIDATES
from ..schemas import OracleRecord
from ..utils.errors import DomainError, OracleLimitError
from .coherence import coherence_value
from .noise_model import Nsd
from .sequences import ACTION_CODES, DEFAULT_DELTA_T, DEFAULT_PULSES_PER_SEGMENT, DdSequence, SegmentKind
from .spectral import FrequencyGrid, TransformCache

logger = logging.getLogger(__name__)

DEFAULT_EXHAUSTIVE_LIMIT = 8
DEFAULT_DEPTH = 2
DEFAULT_EXHAUSTIVE_MAX_TIME = 32.0

Scorer = Callable[[tuple[int, ...]], float]


@dataclass(frozen=True)
class OracleStep:
    index: int
    action: int
    best_coherence: float


@dataclass
class OracleResult:
    best_sequence: DdSequence
    best_coherence: float
    evaluated_count: int
    mode: str
    depth: int | None = None
    steps: list[OracleStep] = field(default_factory=list)

    def to_record(self, env_id: int) -> OracleRecord:
        return OracleRecord(
            env_id=env_id,
            T=self.best_sequence.total_time,
            actions=list(self.best_sequence.codes),
            coherence=self.best_coherence,
            mode=self.mode,
            evaluated_count=self.evaluated_count,
            depth=self.depth,
        )


class _Scorer:
    def __init__(
        self, nsd: Nsd, grid: FrequencyGrid, cache: TransformCache, delta_t: float, pulses_per_segment: int
    ) -> None:
        self.nsd, self.grid, self.cache = nsd, grid, cache
        self.delta_t, self.pulses_per_segment = delta_t, pulses_per_segment

    def sequence(self, actions: Sequence[int]) -> DdSequence:
        return DdSequence(tuple(SegmentKind(a) for a in actions), self.delta_t, self.pulses_per_segment)

    def __call__(self, actions: tuple[int, ...]) -> float:
        return coherence_value(self.sequence(actions), self.nsd, self.grid, self.cache)


def _best_of(candidates: Sequence[tuple[int, ...]], scorer: Scorer, map_fn=None) -> tuple[tuple[int, ...], float]:
    """Maximum over candidates in lexicographic order; ties keep the earliest."""

    scores = list(map_fn(scorer, candidates)) if map_fn is not None else [scorer(c) for c in candidates]
    best_index = 0
    for index, score in enumerate(scores):
        if score > scores[best_index]:
            best_index = index
    return candidates[best_index], scores[best_index]


def oracle_exhaustive(
    nsd: Nsd,
    n_segments: int,
    cache: TransformCache,
    *,
    grid: FrequencyGrid | None = None,
    delta_t: float = DEFAULT_DELTA_T,
    pulses_per_segment: int = DEFAULT_PULSES_PER_SEGMENT,
    limit: int = DEFAULT_EXHAUSTIVE_LIMIT,
    map_fn=None,
) -> OracleResult:
    """Score every one of the 4^N action lists.

    ``map_fn(fn, items)`` may fan the scoring out over a worker pool; it must
    return results in input order.
    """

    if n_segments < 1:
        raise DomainError(f"N must be >= 1, got {n_segments}")
    if n_segments > limit:
        raise OracleLimitError(
            f"exhaustive search over N={n_segments} segments exceeds the limit of {limit} "
            f"(4^{n_segments} sequences); use incremental mode"
        )
    scorer = _Scorer(nsd, grid or FrequencyGrid(), cache, delta_t, pulses_per_segment)
    candidates = list(itertools.product(ACTION_CODES, repeat=n_segments))
    best, score = _best_of(candidates, scorer, map_fn)
    ORACLE_CANDIDATES.labels(mode="exhaustive").inc(len(candidates))
    return OracleResult(scorer.sequence(best), score, len(candidates), "exhaustive")


def oracle_incremental(
    nsd: Nsd,
    n_segments: int,
    cache: TransformCache,
    *,
    grid: FrequencyGrid | None = None,
    depth: int = DEFAULT_DEPTH,
    delta_t: float = DEFAULT_DELTA_T,
    pulses_per_segment: int = DEFAULT_PULSES_PER_SEGMENT,
    map_fn=None,
) -> OracleResult:
    """Receding-horizon brute force with lookahead ``depth``."""

    if n_segments < 1:
        raise DomainError(f"N must be >= 1, got {n_segments}")
    if depth < 1:
        raise DomainError(f"depth must be >= 1, got {depth}")
    scorer = _Scorer(nsd, grid or FrequencyGrid(), cache, delta_t, pulses_per_segment)
    prefix: tuple[int, ...] = ()
    evaluated = 0
    steps: list[OracleStep] = []
    score = 0.0
    while len(prefix) < n_segments:
        horizon = min(depth, n_segments - len(prefix))
        candidates = [prefix + ext for ext in itertools.product(ACTION_CODES, repeat=horizon)]
        best, score = _best_of(candidates, scorer, map_fn)
        evaluated += len(candidates)
        prefix = prefix + (best[len(prefix)],)
        steps.append(OracleStep(len(prefix) - 1, prefix[-1], score))
    ORACLE_CANDIDATES.labels(mode="incremental").inc(evaluated)
    # the last step's horizon is 1, so ``score`` belongs to the committed sequence
    return OracleResult(scorer.sequence(prefix), score, evaluated, "incremental", depth=depth, steps=steps)


def oracle(
    nsd: Nsd,
    n_segments: int,
    cache: TransformCache,
    *,
    grid: FrequencyGrid | None = None,
    mode: str | None = None,
    depth: int = DEFAULT_DEPTH,
    delta_t: float = DEFAULT_DELTA_T,
    pulses_per_segment: int = DEFAULT_PULSES_PER_SEGMENT,
    limit: int = DEFAULT_EXHAUSTIVE_LIMIT,
    exhaustive_max_time: float = DEFAULT_EXHAUSTIVE_MAX_TIME,
    map_fn=None,
) -> OracleResult:
    """Dispatch on ``mode``; ``None`` picks exhaustive for short sequences, incremental otherwise."""

    if mode is None:
        short = n_segments * delta_t <= exhaustive_max_time + 1e-9 and n_segments <= limit
        mode = "exhaustive" if short else "incremental"
        logger.debug("Oracle mode for N=%d: %s", n_segments, mode)
    kwargs = dict(grid=grid, delta_t=delta_t, pulses_per_segment=pulses_per_segment, map_fn=map_fn)
    if mode == "exhaustive":
        return oracle_exhaustive(nsd, n_segments, cache, limit=limit, **kwargs)
    if mode == "incremental":
        return oracle_incremental(nsd, n_segments, cache, depth=depth, **kwargs)
    raise DomainError(f"unknown oracle mode {mode!r}; expected exhaustive or incremental")


def oracle_ladder(nsd: Nsd, max_segments: int, cache: TransformCache, **kwargs) -> list[OracleResult]:
    """Oracle results for N = 1 … ``max_segments`` (per-T normalisation baseline)."""

    return [oracle(nsd, n, cache, **kwargs) for n in range(1, max_segments + 1)]
