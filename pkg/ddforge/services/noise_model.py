"""Parametric noise spectral densities and randomised noise environments.

Frequencies are angular, in rad/µs; times are in µs. Two spectral shapes are
supported: a Gaussian peak on a constant floor (NV-center spin bath) and a
three-component model with an additional 1/f term (neutral-atom hardware).
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Mapping, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..utils.errors import ConfigError, DomainError

logger = logging.getLogger(__name__)

DEFAULT_GAMMA = 1.0705e-3  # MHz/G
SAMPLED_PARAMETERS = ("y0", "a", "B", "w1")
DEFAULT_RANGES: dict[str, tuple[float, float]] = {
    "y0": (0.002, 0.008),
    "a": (0.3, 0.7),
    "B": (520.0, 538.0),
    "w1": (0.004, 0.009),
}


@dataclass(frozen=True)
class GaussianNsd:
    """S(ω) = y0 + a·exp(−(ω − v_L)² / (2·w1²))."""

    y0: float
    a: float
    v_L: float
    w1: float
    source_B: float | None = None

    def __post_init__(self) -> None:
        if not self.y0 >= 0:
            raise DomainError(f"y0 must be >= 0, got {self.y0}")
        if not self.a >= 0:
            raise DomainError(f"a must be >= 0, got {self.a}")
        if not self.w1 > 0:
            raise DomainError(f"w1 must be > 0, got {self.w1}")
        if not self.v_L > 0:
            raise DomainError(f"v_L must be > 0, got {self.v_L}")

    def __call__(self, omega: ArrayLike) -> NDArray[np.float64] | float:
        return evaluate_nsd(self, omega)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class ThreeComponentNsd:
    """S(ω) = y0 + a_g·exp(−(ω − v_g)² / (2·w_g²)) + a_1f/ω, defined for ω > 0."""

    y0: float
    a_g: float
    v_g: float
    w_g: float
    a_1f: float

    def __post_init__(self) -> None:
        for name in ("y0", "a_g", "a_1f"):
            value = getattr(self, name)
            if not value >= 0:
                raise DomainError(f"{name} must be >= 0, got {value}")
        if not self.w_g > 0:
            raise DomainError(f"w_g must be > 0, got {self.w_g}")

    def __call__(self, omega: ArrayLike) -> NDArray[np.float64] | float:
        return evaluate_nsd(self, omega)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_vector(cls, values: Sequence[float]) -> "ThreeComponentNsd":
        y0, a_g, v_g, w_g, a_1f = (float(v) for v in values)
        return cls(y0=y0, a_g=a_g, v_g=v_g, w_g=w_g, a_1f=a_1f)

    def as_vector(self) -> tuple[float, float, float, float, float]:
        return (self.y0, self.a_g, self.v_g, self.w_g, self.a_1f)


Nsd = Union[GaussianNsd, ThreeComponentNsd]


def evaluate_nsd(nsd: Nsd, omega: ArrayLike) -> NDArray[np.float64] | float:
    """Evaluate the spectral density at ``omega`` (scalar or array, rad/µs)."""

    w = np.asarray(omega, dtype=np.float64)
    if isinstance(nsd, GaussianNsd):
        if np.any(w < 0) or np.any(~np.isfinite(w)):
            raise DomainError("GaussianNsd is evaluated for finite omega >= 0 only")
        values = nsd.y0 + nsd.a * np.exp(-((w - nsd.v_L) ** 2) / (2.0 * nsd.w1**2))
    elif isinstance(nsd, ThreeComponentNsd):
        if np.any(w <= 0) or np.any(~np.isfinite(w)):
            raise DomainError("ThreeComponentNsd is defined for omega > 0 only (1/f term diverges at 0)")
        values = nsd.y0 + nsd.a_g * np.exp(-((w - nsd.v_g) ** 2) / (2.0 * nsd.w_g**2)) + nsd.a_1f / w
    else:
        raise TypeError(f"unsupported NSD type {type(nsd).__name__}")
    if values.ndim == 0:
        return float(values)
    return values


def larmor_from_field(B: float, gamma: float = DEFAULT_GAMMA, *, include_two_pi: bool = True) -> float:
    """Convert a magnetic field in gauss to an angular Larmor frequency in rad/µs."""

    if not B > 0:
        raise DomainError(f"field B must be > 0 gauss, got {B}")
    if not gamma > 0:
        raise DomainError(f"gamma must be > 0, got {gamma}")
    factor = 2.0 * math.pi if include_two_pi else 1.0
    return factor * gamma * B


@dataclass(frozen=True)
class EnvironmentSampler:
    """Uniform, independent sampling of Gaussian NSD environments.

    Draws come from NumPy's PCG64 generator seeded with ``seed``; each
    parameter is drawn as one vector of ``count`` values in the fixed order
    y0, a, B, w1, so a given seed reproduces bit-for-bit on every platform.
    """

    count: int = 1000
    seed: int = 0
    ranges: Mapping[str, tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_RANGES))
    gamma: float = DEFAULT_GAMMA
    include_two_pi: bool = True

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ConfigError(f"count must be >= 1, got {self.count}", field="count")
        if not self.gamma > 0:
            raise ConfigError(f"gamma must be > 0, got {self.gamma}", field="gamma")
        missing = [name for name in SAMPLED_PARAMETERS if name not in self.ranges]
        if missing:
            raise ConfigError(f"ranges is missing parameters: {', '.join(missing)}", field="ranges")
        for name in SAMPLED_PARAMETERS:
            low, high = self.ranges[name]
            if low > high:
                raise ConfigError(f"ranges.{name}: lower bound {low} exceeds upper bound {high}", field=f"ranges.{name}")
        if not self.ranges["B"][0] > 0:
            raise ConfigError("ranges.B must be strictly positive", field="ranges.B")
        if not self.ranges["w1"][0] > 0:
            raise ConfigError("ranges.w1 must be strictly positive", field="ranges.w1")

    @classmethod
    def from_config(cls, config: Any) -> "EnvironmentSampler":
        """Build a sampler from a :class:`ddforge.schemas.SamplerConfig`."""

        ranges = {name: (rng.low, rng.high) for name, rng in config.ranges.items()}
        return cls(
            count=config.count,
            seed=config.seed,
            ranges=ranges,
            gamma=config.gamma,
            include_two_pi=config.include_two_pi,
        )


def sample_environments(sampler: EnvironmentSampler) -> list[GaussianNsd]:
    """Draw ``sampler.count`` Gaussian NSDs."""

    rng = np.random.default_rng(np.random.PCG64(sampler.seed))
    draws: dict[str, NDArray[np.float64]] = {}
    for name in SAMPLED_PARAMETERS:
        low, high = sampler.ranges[name]
        draws[name] = rng.uniform(low, high, size=sampler.count)

    environments = [
        GaussianNsd(
            y0=float(draws["y0"][i]),
            a=float(draws["a"][i]),
            v_L=larmor_from_field(float(draws["B"][i]), sampler.gamma, include_two_pi=sampler.include_two_pi),
            w1=float(draws["w1"][i]),
            source_B=float(draws["B"][i]),
        )
        for i in range(sampler.count)
    ]
    logger.info("Sampled %d noise environments (seed=%d)", sampler.count, sampler.seed)
    return environments


def environments_to_records(environments: Sequence[GaussianNsd]) -> list[dict[str, Any]]:
    return [
        {"y0": env.y0, "a": env.a, "v_L": env.v_L, "w1": env.w1, "source_B": env.source_B}
        for env in environments
    ]


def environments_from_records(records: Sequence[Mapping[str, Any]]) -> list[GaussianNsd]:
    return [
        GaussianNsd(
            y0=float(record["y0"]),
            a=float(record["a"]),
            v_L=float(record["v_L"]),
            w1=float(record["w1"]),
            source_B=None if record.get("source_B") is None else float(record["source_B"]),
        )
        for record in records
    ]
