"""Post-hoc statistics over learned sequences and coherence results."""

from __future__ import annotations

import logging
from collections import defaultdict
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from ..utils.errors import MissingKeysError, PreconditionError
from .sequences import DdSequence, SegmentKind, round_time

logger = logging.getLogger(__name__)

KIND_NAMES = tuple(kind.name for kind in SegmentKind)
PROPORTION_HEADER = ("T",) + KIND_NAMES + ("sequences",)
PARAMETER_HEADER = ("bin", "low", "high", "count") + KIND_NAMES
AUTOCORRELATION_HEADER = ("lag", "mean_correlation", "sequences")
CDF_HEADER = ("coherence", "fraction")
SUMMARY_HEADER = ("T", "mean", "median", "min", "max", "count")
NORMALIZED_HEADER = ("T", "strategy_mean", "oracle_mean", "normalized")

ResultKey = tuple[int, float]


def _field(record: Any, name: str) -> Any:
    if isinstance(record, Mapping):
        return record[name]
    return getattr(record, name)


def _codes(sequence: DdSequence | Sequence[int]) -> tuple[int, ...]:
    if isinstance(sequence, DdSequence):
        return sequence.codes
    return tuple(int(code) for code in sequence)


def subsequence_proportions(sequences: Sequence[DdSequence | Sequence[int]]) -> dict[str, float]:
    """Fraction of segments of each kind, averaged over sequences."""

    if not sequences:
        raise PreconditionError("subsequence_proportions needs at least one sequence")
    totals = np.zeros(len(KIND_NAMES))
    for sequence in sequences:
        codes = _codes(sequence)
        if not codes:
            raise PreconditionError("cannot take proportions of an empty sequence")
        totals += np.bincount(codes, minlength=len(KIND_NAMES)) / len(codes)
    fractions = totals / len(sequences)
    return dict(zip(KIND_NAMES, (float(f) for f in fractions)))


def proportions_by_time(records: Iterable[Any]) -> list[dict[str, Any]]:
    """Composition per evolution time over train/oracle records (``T`` and ``actions`` fields)."""

    grouped: dict[float, list[tuple[int, ...]]] = defaultdict(list)
    for record in records:
        grouped[round_time(_field(record, "T"))].append(tuple(_field(record, "actions")))
    if not grouped:
        raise PreconditionError("proportions_by_time needs at least one record")
    rows = []
    for total_time in sorted(grouped):
        rows.append({"T": total_time, **subsequence_proportions(grouped[total_time]), "sequences": len(grouped[total_time])})
    return rows


def proportions_by_parameter(
    values: Sequence[float], sequences: Sequence[DdSequence | Sequence[int]], parameter: str, bins: int = 5
) -> list[dict[str, Any]]:
    """Composition within equal-count bins of one noise parameter (one value per sequence)."""

    if len(values) != len(sequences):
        raise PreconditionError(f"{len(values)} {parameter} values for {len(sequences)} sequences")
    if not values:
        raise PreconditionError("proportions_by_parameter needs at least one sequence")
    if bins < 1:
        raise PreconditionError(f"bins must be >= 1, got {bins}")
    order = np.argsort(np.asarray(values, dtype=np.float64), kind="stable")
    rows = []
    for index, members in enumerate(np.array_split(order, min(bins, len(order)))):
        member_values = [float(values[i]) for i in members]
        rows.append(
            {
                "bin": index,
                "low": min(member_values),
                "high": max(member_values),
                "count": len(members),
                **subsequence_proportions([sequences[i] for i in members]),
            }
        )
    logger.debug("Binned %d sequences by %s into %d bins", len(values), parameter, len(rows))
    return rows


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    # constant series have no defined correlation; count them as 0
    if x.size < 2 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return 0.0
    return float(np.clip(np.corrcoef(x, y)[0, 1], -1.0, 1.0))


def sequence_autocorrelation(
    sequences: Sequence[DdSequence | Sequence[int]], max_lag: int
) -> list[tuple[int, float]]:
    """Mean Pearson correlation between codes at positions p and p + k, for k = 0 … ``max_lag``."""

    if not sequences:
        raise PreconditionError("sequence_autocorrelation needs at least one sequence")
    series = [np.asarray(_codes(s), dtype=np.float64) for s in sequences]
    short = [len(s) for s in series if len(s) <= max_lag]
    if short:
        raise PreconditionError(f"sequences must be longer than max_lag={max_lag}; shortest has {min(short)}")
    result = [(0, 1.0)]
    for lag in range(1, max_lag + 1):
        values = [_pearson(s[:-lag], s[lag:]) for s in series]
        result.append((lag, float(np.mean(values))))
    return result


def _keyed(records: Iterable[Any]) -> dict[ResultKey, float]:
    keyed: dict[ResultKey, float] = {}
    for record in records:
        keyed[(int(_field(record, "env_id")), round_time(_field(record, "T")))] = float(_field(record, "coherence"))
    return keyed


def normalized_coherence(results: Iterable[Any], oracle_results: Iterable[Any]) -> list[dict[str, float]]:
    """Mean strategy coherence divided by mean Oracle coherence, per T."""

    strategy, reference = _keyed(results), _keyed(oracle_results)
    missing = set(strategy) ^ set(reference)
    if missing:
        raise MissingKeysError(missing)
    by_time: dict[float, list[ResultKey]] = defaultdict(list)
    for key in reference:
        by_time[key[1]].append(key)
    rows = []
    for total_time in sorted(by_time):
        keys = by_time[total_time]
        strategy_mean = float(np.mean([strategy[k] for k in keys]))
        oracle_mean = float(np.mean([reference[k] for k in keys]))
        rows.append(
            {
                "T": total_time,
                "strategy_mean": strategy_mean,
                "oracle_mean": oracle_mean,
                "normalized": strategy_mean / oracle_mean if oracle_mean > 0 else float("nan"),
            }
        )
    return rows


def _coherences_at(records: Iterable[Any], total_time: float) -> list[float]:
    target = round_time(total_time)
    return [float(_field(r, "coherence")) for r in records if round_time(_field(r, "T")) == target]


def coherence_cdf(records: Iterable[Any], total_time: float) -> list[tuple[float, float]]:
    """Empirical CDF of coherence at ``total_time`` as (value, cumulative fraction) steps."""

    values = np.sort(np.asarray(_coherences_at(records, total_time)))
    if values.size == 0:
        raise PreconditionError(f"no results at T={total_time}")
    unique, counts = np.unique(values, return_counts=True)
    fractions = np.cumsum(counts) / values.size
    return [(float(v), float(f)) for v, f in zip(unique, fractions)]


def mean_coherence_by_time(records: Iterable[Any]) -> list[dict[str, float]]:
    """Mean, median and range of coherence per T."""

    grouped: dict[float, list[float]] = defaultdict(list)
    for record in records:
        grouped[round_time(_field(record, "T"))].append(float(_field(record, "coherence")))
    return [
        {
            "T": total_time,
            "mean": float(np.mean(values)),
            "median": float(np.median(values)),
            "min": float(np.min(values)),
            "max": float(np.max(values)),
            "count": len(values),
        }
        for total_time, values in sorted(grouped.items())
    ]
