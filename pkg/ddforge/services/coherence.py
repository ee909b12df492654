"""Decoherence function χ(T) and coherence W(T) = exp(−χ(T))."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import trapezoid

from ..monitoring import COHERENCE_EVALUATIONS
from ..utils.errors import PreconditionError
from .noise_model import Nsd, evaluate_nsd
from .sequences import DdSequence, Segment
from .spectral import FrequencyGrid, TransformCache, filter_function, power, waveform_transform

CSV_HEADER = ("sequence_id", "nsd_id", "T", "chi", "w")


@dataclass(frozen=True)
class CoherenceResult:
    chi: float
    w: float
    T: float
    grid: FrequencyGrid
    sequence_id: str | None = None
    nsd_id: str | int | None = None

    def csv_row(self) -> tuple[object, ...]:
        return (self.sequence_id, self.nsd_id, self.T, self.chi, self.w)


@lru_cache(maxsize=4096)
def spectral_weight(nsd: Nsd, grid: FrequencyGrid) -> NDArray[np.float64]:
    """S(ω)/ω² on the grid; cached per (environment, grid) since both are immutable."""

    omegas = grid.omegas
    weight = np.asarray(evaluate_nsd(nsd, omegas)) / (omegas * omegas)
    weight.setflags(write=False)
    return weight


def chi_from_filter(filter_values: NDArray[np.float64], nsd: Nsd, grid: FrequencyGrid) -> float:
    """χ = (1/π)·∫ S(ω)/ω² · F(ω) dω by the trapezoidal rule over the grid."""

    COHERENCE_EVALUATIONS.inc()
    chi = float(trapezoid(spectral_weight(nsd, grid) * filter_values, grid.omegas)) / math.pi
    return max(chi, 0.0)


def decoherence_chi(sequence: DdSequence, nsd: Nsd, grid: FrequencyGrid, cache: TransformCache) -> float:
    return chi_from_filter(filter_function(sequence, grid, cache), nsd, grid)


def coherence(
    sequence: DdSequence,
    nsd: Nsd,
    grid: FrequencyGrid,
    cache: TransformCache,
    *,
    sequence_id: str | None = None,
    nsd_id: str | int | None = None,
) -> CoherenceResult:
    chi = decoherence_chi(sequence, nsd, grid, cache)
    return CoherenceResult(
        chi=chi,
        w=math.exp(-chi),
        T=sequence.total_time,
        grid=grid,
        sequence_id=sequence_id if sequence_id is not None else (sequence.label or sequence.names),
        nsd_id=nsd_id,
    )


def coherence_value(sequence: DdSequence, nsd: Nsd, grid: FrequencyGrid, cache: TransformCache) -> float:
    """Shorthand for ``coherence(...).w``; the reward used by the agent and the oracle."""

    return math.exp(-decoherence_chi(sequence, nsd, grid, cache))


def waveform_coherence(segment: Segment, nsd: Nsd, grid: FrequencyGrid, cache: TransformCache) -> float:
    """W for a single whole-interval waveform such as a Ramsey or CPMG-n experiment."""

    chi = chi_from_filter(power(waveform_transform(segment, grid, cache)), nsd, grid)
    return math.exp(-chi)


def coherence_curve(
    sequence_for: Callable[[int], DdSequence],
    nsd: Nsd,
    n_segments: Iterable[int],
    grid: FrequencyGrid,
    cache: TransformCache,
) -> list[CoherenceResult]:
    """Coherence of ``sequence_for(N)`` at each requested segment count."""

    return [coherence(sequence_for(n), nsd, grid, cache) for n in n_segments]


def evaluate_batch(
    sequences: Sequence[DdSequence],
    environments: Sequence[Nsd],
    grid: FrequencyGrid,
    cache: TransformCache,
    *,
    sequence_id: str | None = None,
) -> list[CoherenceResult]:
    """Pairwise evaluation: ``sequences[i]`` under ``environments[i]``.

    A single sequence is broadcast over all environments.
    """

    if len(sequences) == 1 and len(environments) > 1:
        sequences = list(sequences) * len(environments)
    if len(sequences) != len(environments):
        raise PreconditionError("sequences and environments must have equal length (or a single sequence)")
    return [
        coherence(sequence, nsd, grid, cache, sequence_id=sequence_id, nsd_id=index)
        for index, (sequence, nsd) in enumerate(zip(sequences, environments))
    ]
