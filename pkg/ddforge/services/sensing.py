"""Relative AC-magnetometry sensitivity M = √T / (W(T)·|Y(ω_s, T)|); lower is better."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..utils.errors import DomainError, FilterBlindError, PreconditionError
from .coherence import coherence_value
from .noise_model import Nsd
from .sequences import DdSequence
from .spectral import FrequencyGrid, TransformCache, sequence_fourier

DEFAULT_OMEGA_S = 1.0  # rad/µs; 2π rad/µs falls on a zero of every 4 µs segment
DEFAULT_BLIND_FLOOR = 1e-12
CSV_HEADER = ("strategy", "env_id", "T", "omega_s", "w", "y_mag", "M")
SUMMARY_HEADER = ("strategy", "geometric_mean_M", "arithmetic_mean_M", "ratio_to_best", "environments")


@dataclass(frozen=True)
class SensitivityResult:
    metric_m: float
    T: float
    omega_s: float
    w: float
    y_mag: float


def sensitivity_metric(
    sequence: DdSequence,
    nsd: Nsd,
    omega_s: float,
    grid: FrequencyGrid,
    cache: TransformCache,
    *,
    blind_floor: float = DEFAULT_BLIND_FLOOR,
) -> SensitivityResult:
    if not omega_s > 0:
        raise DomainError(f"omega_s must be > 0, got {omega_s}")
    y_mag = abs(sequence_fourier(sequence, omega_s, cache))
    if y_mag < blind_floor:
        raise FilterBlindError(
            f"sequence {sequence.names or '<empty>'} has |Y(omega_s={omega_s:g})| = {y_mag:.3e} µs, "
            f"below the floor {blind_floor:g}"
        )
    w = coherence_value(sequence, nsd, grid, cache)
    total_time = sequence.total_time
    metric = math.sqrt(total_time) / (w * y_mag) if w > 0 else math.inf
    return SensitivityResult(metric_m=metric, T=total_time, omega_s=omega_s, w=w, y_mag=y_mag)


@dataclass(frozen=True)
class StrategySummary:
    strategy: str
    geometric_mean: float
    arithmetic_mean: float
    ratio_to_best: float
    environments: int


@dataclass
class StrategyComparison:
    summaries: list[StrategySummary]
    rows: list[tuple[str, int, float, float, float, float, float]]

    def summary_rows(self) -> list[tuple[object, ...]]:
        return [
            (s.strategy, s.geometric_mean, s.arithmetic_mean, s.ratio_to_best, s.environments) for s in self.summaries
        ]

    def by_name(self) -> dict[str, StrategySummary]:
        return {s.strategy: s for s in self.summaries}


def _geometric_mean(values: Sequence[float]) -> float:
    array = np.asarray(values, dtype=np.float64)
    if np.any(np.isinf(array)):
        return math.inf
    return float(np.exp(np.mean(np.log(array))))


def compare_strategies(
    strategies: Mapping[str, DdSequence | Sequence[DdSequence]],
    environments: Sequence[Nsd],
    omega_s: float,
    grid: FrequencyGrid,
    cache: TransformCache,
    *,
    blind_floor: float = DEFAULT_BLIND_FLOOR,
) -> StrategyComparison:
    """Geometric-mean M per strategy across environments, with ratios to the best.

    A strategy is either one sequence used in every environment or a list
    holding one sequence per environment.
    """

    if not strategies or not environments:
        raise PreconditionError("compare_strategies needs at least one strategy and one environment")
    rows: list[tuple[str, int, float, float, float, float, float]] = []
    means: dict[str, tuple[float, float]] = {}
    for name, choice in strategies.items():
        sequences = [choice] * len(environments) if isinstance(choice, DdSequence) else list(choice)
        if len(sequences) != len(environments):
            raise PreconditionError(
                f"strategy {name!r} provides {len(sequences)} sequences for {len(environments)} environments"
            )
        metrics = []
        for env_id, (sequence, nsd) in enumerate(zip(sequences, environments)):
            result = sensitivity_metric(sequence, nsd, omega_s, grid, cache, blind_floor=blind_floor)
            metrics.append(result.metric_m)
            rows.append((name, env_id, result.T, omega_s, result.w, result.y_mag, result.metric_m))
        means[name] = (_geometric_mean(metrics), float(np.mean(metrics)))

    best = min(geo for geo, _ in means.values())
    summaries = [
        StrategySummary(
            strategy=name,
            geometric_mean=geo,
            arithmetic_mean=arith,
            ratio_to_best=(geo / best) if math.isfinite(best) and best > 0 else math.nan,
            environments=len(environments),
        )
        for name, (geo, arith) in means.items()
    ]
    return StrategyComparison(summaries=summaries, rows=rows)


def sensitivity_curve(
    sequences: Sequence[DdSequence],
    nsd: Nsd,
    omega_s: float,
    grid: FrequencyGrid,
    cache: TransformCache,
) -> list[SensitivityResult]:
    """M for each sequence (typically one per evolution time)."""

    return [sensitivity_metric(sequence, nsd, omega_s, grid, cache) for sequence in sequences]
