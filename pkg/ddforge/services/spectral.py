"""Fourier transforms of modulation functions, filter functions and the transform cache.

A sequence's transform is the parity-weighted sum of its segments' transforms
(linearity), so each segment is integrated once per (kind, pulse count,
absolute interval, ω) and memoised. Segment integrals use the trapezoidal
rule on pieces split at the pulse times, so every piece has a constant sign.
"""

from __future__ import annotations

import hashlib
import logging
import os
import threading
from collections import OrderedDict
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import trapezoid

from ..monitoring import TRANSFORM_LOOKUPS
from ..utils.errors import CacheFormatError, CacheMissingError, ConfigError, DomainError
from ..utils.storage import write_text_atomic
from .sequences import DdSequence, Segment, SegmentKind, pulse_times, round_time

logger = logging.getLogger(__name__)

REFERENCE_DURATION = 4.0  # µs that ``nodes_per_segment`` refers to
CACHE_HEADER = "ddforge-transform-cache v1"
_CHUNK_ROWS = 256
DEFAULT_MAX_BLOCKS = 1024  # grid-sized arrays kept per cache


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform angular-frequency grid in rad/µs."""

    omega_min: float = 0.001
    omega_max: float = 8.5
    n_points: int = 4000

    def __post_init__(self) -> None:
        if not 0 < self.omega_min < self.omega_max:
            raise ConfigError(
                f"grid requires 0 < omega_min < omega_max, got [{self.omega_min}, {self.omega_max}]",
                field="grid",
            )
        if self.n_points < 2:
            raise ConfigError(f"grid needs at least 2 points, got {self.n_points}", field="grid.n_points")

    @cached_property
    def omegas(self) -> NDArray[np.float64]:
        values = np.linspace(self.omega_min, self.omega_max, self.n_points)
        values.setflags(write=False)
        return values

    @cached_property
    def token(self) -> str:
        return hashlib.blake2b(self.omegas.tobytes(), digest_size=16).hexdigest()

    def refined(self, factor: int) -> "FrequencyGrid":
        return FrequencyGrid(self.omega_min, self.omega_max, (self.n_points - 1) * factor + 1)


@dataclass(frozen=True)
class QuadratureSettings:
    nodes_per_segment: int = 2000
    end_correction: bool = True

    def __post_init__(self) -> None:
        if self.nodes_per_segment < 2:
            raise ConfigError("nodes_per_segment must be >= 2", field="nodes_per_segment")

    @property
    def nodes_per_us(self) -> float:
        return self.nodes_per_segment / REFERENCE_DURATION

    def header(self) -> str:
        return f"{CACHE_HEADER} nodes={self.nodes_per_segment} end_correction={int(self.end_correction)}"


@dataclass(frozen=True)
class TransformKey:
    kind: SegmentKind
    n_pulses: int
    t_start: float
    t_end: float
    omega: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", SegmentKind.parse(self.kind))
        object.__setattr__(self, "t_start", round_time(self.t_start))
        object.__setattr__(self, "t_end", round_time(self.t_end))
        object.__setattr__(self, "omega", float(self.omega))

    @classmethod
    def for_segment(cls, segment: Segment, omega: float) -> "TransformKey":
        return cls(segment.kind, segment.n_pulses, segment.t_start, segment.t_end, omega)

    @property
    def signature(self) -> tuple[int, int, float, float]:
        return (int(self.kind), self.n_pulses, self.t_start, self.t_end)


# ----------------------------------------------------------------------
# Quadrature
# ----------------------------------------------------------------------
def _pieces(
    t_start: float, t_end: float, pulses: Sequence[float], sign: int, nodes_per_us: float
) -> list[tuple[float, float, int, int]]:
    """Split [t_start, t_end] at the pulses into constant-sign pieces with node counts."""

    edges = [t_start, *pulses, t_end]
    pieces = []
    for index in range(len(edges) - 1):
        a, b = edges[index], edges[index + 1]
        n_nodes = max(2, int(round(nodes_per_us * (b - a))))
        pieces.append((a, b, sign if index % 2 == 0 else -sign, n_nodes))
    return pieces


def _integrate_pieces(
    pieces: Sequence[tuple[float, float, int, int]], omegas: NDArray[np.float64], end_correction: bool
) -> NDArray[np.complex128]:
    """Trapezoidal ∫ y(t)·e^(−iωt) dt over the pieces, one row per ω."""

    omegas = np.ascontiguousarray(omegas, dtype=np.float64)
    result = np.zeros(omegas.shape[0], dtype=np.complex128)
    for a, b, sign, n_nodes in pieces:
        t = np.linspace(a, b, n_nodes)
        h = (b - a) / (n_nodes - 1)
        for lo in range(0, omegas.shape[0], _CHUNK_ROWS):
            w = omegas[lo : lo + _CHUNK_ROWS]
            values = trapezoid(np.exp(-1j * np.outer(w, t)), t, axis=-1)
            if end_correction:
                # Euler-Maclaurin: -h²/12 · (f'(b) - f'(a)) with f' = -iω f
                values = values + (1j * w * h * h / 12.0) * (np.exp(-1j * w * b) - np.exp(-1j * w * a))
            result[lo : lo + _CHUNK_ROWS] += sign * values
    return result


def integrate_segment(
    segment: Segment, omegas: ArrayLike, quadrature: QuadratureSettings = QuadratureSettings()
) -> NDArray[np.complex128]:
    """Uncached segment transform with local entry sign +1."""

    w = np.atleast_1d(np.asarray(omegas, dtype=np.float64))
    if np.any(w <= 0):
        raise DomainError("segment transforms are evaluated for omega > 0 only")
    pieces = _pieces(segment.t_start, segment.t_end, pulse_times(segment), 1, quadrature.nodes_per_us)
    return _integrate_pieces(pieces, w, quadrature.end_correction)


# ----------------------------------------------------------------------
# Cache
# ----------------------------------------------------------------------
class TransformCache:
    """Memoised segment transforms Y_k(ω), keyed by segment signature and ω.

    Entries live in a nested mapping ``signature -> {omega: value}``. Lookups
    for a whole :class:`FrequencyGrid` are additionally memoised as read-only
    arrays keyed by the grid token; those blocks are derived data, are not
    persisted, and only the ``max_blocks`` most recently used are kept.
    Entry reads are lock-free; writes and block bookkeeping take ``_lock``.
    """

    def __init__(
        self,
        quadrature: QuadratureSettings | None = None,
        *,
        enabled: bool = True,
        max_blocks: int = DEFAULT_MAX_BLOCKS,
    ) -> None:
        if max_blocks < 0:
            raise ConfigError(f"max_blocks must be >= 0, got {max_blocks}", field="max_blocks")
        self.quadrature = quadrature or QuadratureSettings()
        self.enabled = enabled
        self.max_blocks = max_blocks
        self._entries: dict[tuple[int, int, float, float], dict[float, complex]] = {}
        self._blocks: OrderedDict[tuple[tuple[int, int, float, float], str], NDArray[np.complex128]] = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    # -- mapping-style access ------------------------------------------
    def __len__(self) -> int:
        with self._lock:
            return sum(len(row) for row in self._entries.values())

    def __contains__(self, key: TransformKey) -> bool:
        return key.omega in self._entries.get(key.signature, {})

    def get(self, key: TransformKey) -> complex | None:
        return self._entries.get(key.signature, {}).get(key.omega)

    def put(self, key: TransformKey, value: complex) -> None:
        with self._lock:
            self._entries.setdefault(key.signature, {})[key.omega] = complex(value)

    def items(self) -> Iterator[tuple[TransformKey, complex]]:
        for signature in sorted(self._entries):
            kind, n_pulses, t_start, t_end = signature
            row = self._entries[signature]
            for omega in sorted(row):
                yield TransformKey(SegmentKind(kind), n_pulses, t_start, t_end, omega), row[omega]

    def segments(self) -> int:
        return len(self._entries)

    def _count(self, hits: int, misses: int) -> None:
        with self._lock:
            self.hits += hits
            self.misses += misses
        if hits:
            TRANSFORM_LOOKUPS.labels(result="hit").inc(hits)
        if misses:
            TRANSFORM_LOOKUPS.labels(result="miss").inc(misses)

    # -- transform access ----------------------------------------------
    def segment_value(self, segment: Segment, omega: float) -> complex:
        key = TransformKey.for_segment(segment, omega)
        if self.enabled:
            cached = self.get(key)
            if cached is not None:
                self._count(1, 0)
                return cached
        value = complex(integrate_segment(segment, [key.omega], self.quadrature)[0])
        self._count(0, 1)
        if self.enabled:
            self.put(key, value)
        return value

    def segment_block(
        self, segment: Segment, omegas: NDArray[np.float64], token: str | None = None
    ) -> NDArray[np.complex128]:
        """Transforms of ``segment`` at every ω in ``omegas`` (local entry sign +1)."""

        signature = segment.signature
        if not self.enabled:
            self._count(0, len(omegas))
            return integrate_segment(segment, omegas, self.quadrature)
        if token is not None:
            with self._lock:
                block = self._blocks.get((signature, token))
                if block is not None:
                    self._blocks.move_to_end((signature, token))
            if block is not None:
                self._count(len(block), 0)
                return block

        row = self._entries.get(signature, {})
        keys = [float(w) for w in omegas]
        found = [row.get(w) for w in keys]
        missing = [i for i, value in enumerate(found) if value is None]
        block = np.empty(len(keys), dtype=np.complex128)
        if missing:
            computed = integrate_segment(segment, np.asarray([keys[i] for i in missing]), self.quadrature)
            with self._lock:
                target = self._entries.setdefault(signature, {})
                for i, value in zip(missing, computed.tolist()):
                    target[keys[i]] = value
                    found[i] = value
        block[:] = found
        self._count(len(keys) - len(missing), len(missing))
        if token is not None and self.max_blocks:
            block.setflags(write=False)
            with self._lock:
                self._blocks[(signature, token)] = block
                while len(self._blocks) > self.max_blocks:
                    self._blocks.popitem(last=False)
        return block

    # -- bookkeeping ---------------------------------------------------
    def merge(self, other: "TransformCache") -> int:
        """Copy entries from ``other`` that are not present here; returns the count added."""

        if other.quadrature != self.quadrature:
            raise ConfigError("cannot merge transform caches built with different quadrature settings")
        added = 0
        with self._lock:
            for signature, row in other._entries.items():
                target = self._entries.setdefault(signature, {})
                for omega, value in row.items():
                    if omega not in target:
                        target[omega] = value
                        added += 1
        return added

    def stats(self) -> dict[str, int]:
        entries = len(self)
        with self._lock:
            blocks = len(self._blocks)
        return {"entries": entries, "hits": self.hits, "misses": self.misses, "segments": self.segments(), "blocks": blocks}


def cache_save(cache: TransformCache, path: str | os.PathLike[str]) -> Path:
    """Persist every entry; floats are written as hex so the round trip is bit-exact."""

    lines = [cache.quadrature.header()]
    for key, value in cache.items():
        lines.append(
            f"{int(key.kind)} {key.n_pulses} {key.t_start.hex()} {key.t_end.hex()} "
            f"{key.omega.hex()} {value.real.hex()} {value.imag.hex()}"
        )
    target = write_text_atomic(path, "\n".join(lines) + "\n")
    logger.info("Saved transform cache with %d entries to %s", len(cache), target)
    return target


def _parse_header(line: str) -> QuadratureSettings:
    if not line.startswith(CACHE_HEADER):
        raise CacheFormatError(f"line 1: missing '{CACHE_HEADER}' header", line_number=1, record=line)
    options: dict[str, str] = {}
    for part in line[len(CACHE_HEADER) :].split():
        name, _, value = part.partition("=")
        options[name] = value
    try:
        return QuadratureSettings(
            nodes_per_segment=int(options.get("nodes", 2000)),
            end_correction=bool(int(options.get("end_correction", 1))),
        )
    except ValueError as exc:
        raise CacheFormatError(f"line 1: invalid header options {line!r}", line_number=1, record=line) from exc


def cache_load(
    path: str | os.PathLike[str],
    *,
    create_if_absent: bool = False,
    quadrature: QuadratureSettings | None = None,
) -> TransformCache:
    """Load a cache written by :func:`cache_save`.

    A missing file yields an empty cache when ``create_if_absent`` is set.
    When ``quadrature`` is given it must match the settings the file was built with.
    """

    source = Path(path)
    if not source.exists():
        if create_if_absent:
            logger.info("Transform cache %s not found; starting empty", source)
            return TransformCache(quadrature)
        raise CacheMissingError(f"transform cache file not found: {source}")

    with source.open("r", encoding="utf-8") as handle:
        header = handle.readline().rstrip("\n")
        stored = _parse_header(header)
        if quadrature is not None and quadrature != stored:
            raise ConfigError(
                f"cache {source} was built with {stored}, but the run uses {quadrature}", field="cache_path"
            )
        cache = TransformCache(stored)
        entries = cache._entries
        for line_number, raw in enumerate(handle, start=2):
            record = raw.strip()
            if not record:
                continue
            parts = record.split()
            if len(parts) != 7:
                raise CacheFormatError(
                    f"line {line_number}: expected 7 fields, got {len(parts)}: {record!r}",
                    line_number=line_number,
                    record=record,
                )
            try:
                kind = int(SegmentKind(int(parts[0])))
                n_pulses = int(parts[1])
                t_start, t_end, omega, real, imag = (float.fromhex(p) for p in parts[2:])
            except ValueError as exc:
                raise CacheFormatError(
                    f"line {line_number}: unparseable record {record!r}", line_number=line_number, record=record
                ) from exc
            entries.setdefault((kind, n_pulses, t_start, t_end), {})[omega] = complex(real, imag)
    logger.info("Loaded transform cache with %d entries from %s", len(cache), source)
    return cache


# ----------------------------------------------------------------------
# Sequence transforms and filter functions
# ----------------------------------------------------------------------
def segment_fourier(segment: Segment, omega: float, cache: TransformCache) -> complex:
    """Y_k(ω) of one segment starting at +1, memoised in ``cache``."""

    if not omega > 0:
        raise DomainError(f"omega must be > 0, got {omega}")
    return cache.segment_value(segment, omega)


def sequence_transform(
    sequence: DdSequence, omegas: ArrayLike, cache: TransformCache, *, token: str | None = None
) -> NDArray[np.complex128]:
    """Σ_k p_k·Y_k(ω) over an array of ω."""

    w = np.atleast_1d(np.asarray(omegas, dtype=np.float64))
    if np.any(w <= 0):
        raise DomainError("omega must be > 0")
    total = np.zeros(w.shape[0], dtype=np.complex128)
    for segment, parity in zip(sequence.segments, sequence.entry_parities):
        block = cache.segment_block(segment, w, token)
        if parity > 0:
            total += block
        else:
            total -= block
    return total


def sequence_fourier(sequence: DdSequence, omega: float, cache: TransformCache) -> complex:
    if not omega > 0:
        raise DomainError(f"omega must be > 0, got {omega}")
    total = 0j
    for segment, parity in zip(sequence.segments, sequence.entry_parities):
        total += parity * cache.segment_value(segment, omega)
    return total


def grid_transform(sequence: DdSequence, grid: FrequencyGrid, cache: TransformCache) -> NDArray[np.complex128]:
    return sequence_transform(sequence, grid.omegas, cache, token=grid.token)


def waveform_transform(segment: Segment, grid: FrequencyGrid, cache: TransformCache) -> NDArray[np.complex128]:
    """Transform of a single whole-interval waveform (e.g. Ramsey, CPMG-n over [0, T])."""

    return cache.segment_block(segment, grid.omegas, grid.token)


def power(values: NDArray[np.complex128]) -> NDArray[np.float64]:
    return values.real * values.real + values.imag * values.imag


def filter_function(sequence: DdSequence, grid: FrequencyGrid, cache: TransformCache) -> NDArray[np.float64]:
    """F(ω, T) = |Y(ω, T)|² on every grid point."""

    return power(grid_transform(sequence, grid, cache))
