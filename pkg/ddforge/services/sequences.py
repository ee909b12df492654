"""Dynamical-decoupling building blocks and their composition into sequences."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from typing import Any, Mapping, Sequence

import numpy as np
from numpy.typing import NDArray

from ..utils.errors import ConfigError, DomainError

DEFAULT_DELTA_T = 4.0  # µs
DEFAULT_PULSES_PER_SEGMENT = 4
TIME_DECIMALS = 9


class SegmentKind(IntEnum):
    FID = 0
    Hahn = 1
    CPMG = 2
    UDD = 3

    @classmethod
    def parse(cls, value: "SegmentKind | int | str") -> "SegmentKind":
        if isinstance(value, SegmentKind):
            return value
        if isinstance(value, str):
            text = value.strip()
            if text.lstrip("-").isdigit():
                return cls(int(text))
            for member in cls:
                if member.name.lower() == text.lower():
                    return member
            raise DomainError(f"unknown segment kind {value!r}; expected one of FID|Hahn|CPMG|UDD")
        try:
            return cls(int(value))
        except ValueError as exc:
            raise DomainError(f"unknown segment code {value!r}; expected 0-3") from exc


ACTION_CODES: tuple[int, ...] = tuple(int(kind) for kind in SegmentKind)


def pulse_count(kind: SegmentKind, pulses_per_segment: int = DEFAULT_PULSES_PER_SEGMENT) -> int:
    if kind is SegmentKind.FID:
        return 0
    if kind is SegmentKind.Hahn:
        return 1
    return pulses_per_segment


def round_time(value: float) -> float:
    return round(float(value), TIME_DECIMALS)


@dataclass(frozen=True)
class Segment:
    """One block of free evolution interrupted by instantaneous π pulses."""

    kind: SegmentKind
    n_pulses: int
    t_start: float
    t_end: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", SegmentKind.parse(self.kind))
        if not self.t_end > self.t_start:
            raise DomainError(f"segment must have t_end > t_start, got [{self.t_start}, {self.t_end}]")
        if self.kind is SegmentKind.FID and self.n_pulses != 0:
            raise DomainError("FID segments carry no pulses")
        if self.kind is SegmentKind.Hahn and self.n_pulses != 1:
            raise DomainError("Hahn segments carry exactly one pulse")
        if self.kind in (SegmentKind.CPMG, SegmentKind.UDD) and self.n_pulses < 1:
            raise DomainError(f"{self.kind.name} segments need at least one pulse")

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @property
    def signature(self) -> tuple[int, int, float, float]:
        """Hashable identity used by the transform cache (times rounded)."""

        return (int(self.kind), self.n_pulses, round_time(self.t_start), round_time(self.t_end))


def pulse_times(segment: Segment) -> tuple[float, ...]:
    """Absolute π-pulse times of ``segment``, strictly increasing and interior."""

    n = segment.n_pulses
    start, duration = segment.t_start, segment.duration
    if segment.kind is SegmentKind.FID:
        return ()
    if segment.kind is SegmentKind.Hahn:
        return (start + duration / 2.0,)
    if segment.kind is SegmentKind.CPMG:
        return tuple(start + (j - 0.5) * duration / n for j in range(1, n + 1))
    # Uhrig spacing
    return tuple(start + duration * math.sin(j * math.pi / (2 * n + 2)) ** 2 for j in range(1, n + 1))


def segment_parity(segment: Segment) -> int:
    return -1 if segment.n_pulses % 2 else 1


def ramsey_waveform(total_time: float) -> Segment:
    """Free evolution over [0, T] (a Ramsey experiment with ideal π/2 pulses)."""

    return Segment(SegmentKind.FID, 0, 0.0, float(total_time))


def cpmg_waveform(total_time: float, n_pulses: int) -> Segment:
    """``n_pulses`` equidistant π pulses spread over the whole interval [0, T]."""

    return Segment(SegmentKind.CPMG, int(n_pulses), 0.0, float(total_time))


@dataclass(frozen=True)
class DdSequence:
    """Ordered list of fixed-duration segments; total time T = len(actions)·Δt."""

    actions: tuple[SegmentKind, ...]
    delta_t: float = DEFAULT_DELTA_T
    pulses_per_segment: int = DEFAULT_PULSES_PER_SEGMENT
    label: str | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "actions", tuple(SegmentKind.parse(a) for a in self.actions))
        if not self.delta_t > 0:
            raise ConfigError(f"delta_t must be > 0, got {self.delta_t}", field="delta_t")
        if self.pulses_per_segment < 1:
            raise ConfigError("pulses_per_segment must be >= 1", field="pulses_per_segment")

    # ------------------------------------------------------------------
    # Construction helpers
    # ------------------------------------------------------------------
    @classmethod
    def pure(
        cls,
        kind: SegmentKind | int | str,
        n_segments: int,
        *,
        delta_t: float = DEFAULT_DELTA_T,
        pulses_per_segment: int = DEFAULT_PULSES_PER_SEGMENT,
    ) -> "DdSequence":
        kind = SegmentKind.parse(kind)
        return cls((kind,) * n_segments, delta_t, pulses_per_segment, label=kind.name)

    @classmethod
    def from_names(cls, text: str, **kwargs: Any) -> "DdSequence":
        names = [part for part in text.replace(",", "|").split("|") if part.strip()]
        return cls(tuple(SegmentKind.parse(name) for name in names), **kwargs)

    @classmethod
    def from_json(cls, payload: Mapping[str, Any], *, pulses_per_segment: int | None = None) -> "DdSequence":
        return cls(
            tuple(SegmentKind.parse(code) for code in payload["actions"]),
            float(payload.get("delta_t", DEFAULT_DELTA_T)),
            int(pulses_per_segment or payload.get("pulses_per_segment", DEFAULT_PULSES_PER_SEGMENT)),
        )

    def to_json(self) -> dict[str, Any]:
        return {"delta_t": self.delta_t, "actions": [int(a) for a in self.actions]}

    def extend(self, *kinds: SegmentKind | int) -> "DdSequence":
        return DdSequence(self.actions + tuple(SegmentKind.parse(k) for k in kinds), self.delta_t, self.pulses_per_segment)

    # ------------------------------------------------------------------
    # Derived structure
    # ------------------------------------------------------------------
    def __len__(self) -> int:
        return len(self.actions)

    @property
    def total_time(self) -> float:
        return len(self.actions) * self.delta_t

    @property
    def names(self) -> str:
        return "|".join(kind.name for kind in self.actions)

    @property
    def codes(self) -> tuple[int, ...]:
        return tuple(int(a) for a in self.actions)

    @cached_property
    def segments(self) -> tuple[Segment, ...]:
        return tuple(
            Segment(kind, pulse_count(kind, self.pulses_per_segment), k * self.delta_t, (k + 1) * self.delta_t)
            for k, kind in enumerate(self.actions)
        )

    @cached_property
    def entry_parities(self) -> tuple[int, ...]:
        parities: list[int] = []
        sign = 1
        for segment in self.segments:
            parities.append(sign)
            sign *= segment_parity(segment)
        return tuple(parities)

    @property
    def total_pulses(self) -> int:
        return sum(segment.n_pulses for segment in self.segments)

    def pulse_times(self) -> tuple[float, ...]:
        return tuple(t for segment in self.segments for t in pulse_times(segment))

    def modulation_value(self, t: float) -> int:
        """y(t) in {+1, −1}; a pulse exactly at ``t`` has already flipped the sign."""

        total = self.total_time
        if not 0.0 <= t <= total or not self.actions:
            raise DomainError(f"t={t} lies outside [0, {total}]")
        index = min(int(t // self.delta_t), len(self.actions) - 1)
        segment = self.segments[index]
        flips = int(np.searchsorted(np.asarray(pulse_times(segment)), t, side="right"))
        return self.entry_parities[index] * (-1 if flips % 2 else 1)

    def modulation(self, times: Sequence[float] | NDArray[np.float64]) -> NDArray[np.int8]:
        """Vectorised :meth:`modulation_value`."""

        t = np.asarray(times, dtype=np.float64)
        if t.size and (t.min() < 0.0 or t.max() > self.total_time):
            raise DomainError(f"times must lie inside [0, {self.total_time}]")
        flips = np.searchsorted(np.asarray(self.pulse_times()), t, side="right")
        return np.where(flips % 2 == 0, 1, -1).astype(np.int8)


def modulation_value(sequence: DdSequence, t: float) -> int:
    return sequence.modulation_value(t)


def sequence_from_codes(
    codes: Sequence[int], *, delta_t: float = DEFAULT_DELTA_T, pulses_per_segment: int = DEFAULT_PULSES_PER_SEGMENT
) -> DdSequence:
    return DdSequence(tuple(SegmentKind.parse(c) for c in codes), delta_t, pulses_per_segment)


def segments_for_time(total_time: float, delta_t: float = DEFAULT_DELTA_T) -> int:
    """Number of segments for ``total_time``; it must be a positive multiple of Δt."""

    ratio = total_time / delta_t
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > 1e-9:
        raise ConfigError(f"T={total_time} µs is not a positive multiple of delta_t={delta_t} µs", field="T")
    return n
