"""Pydantic schemas for configuration and result documents."""

from __future__ import annotations

from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class ParameterRange(BaseModel):
    """Closed interval [low, high]; accepts ``{"low": .., "high": ..}`` or ``[low, high]``."""

    model_config = ConfigDict(frozen=True)

    low: float
    high: float

    @model_validator(mode="before")
    @classmethod
    def _from_pair(cls, value):
        if isinstance(value, (list, tuple)):
            if len(value) != 2:
                raise ValueError("a range needs exactly two bounds")
            return {"low": value[0], "high": value[1]}
        return value

    @model_validator(mode="after")
    def _ordered(self) -> "ParameterRange":
        if self.low > self.high:
            raise ValueError(f"lower bound {self.low} exceeds upper bound {self.high}")
        return self


class SamplerConfig(BaseModel):
    ranges: Dict[str, ParameterRange]
    count: int = Field(default=1000, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    gamma: float = Field(default=1.0705e-3, gt=0)
    include_two_pi: bool = True

    @field_validator("ranges")
    @classmethod
    def _required_parameters(cls, value: Dict[str, ParameterRange]) -> Dict[str, ParameterRange]:
        missing = [name for name in ("y0", "a", "B", "w1") if name not in value]
        if missing:
            raise ValueError(f"missing parameters {', '.join(missing)}")
        if value["B"].low <= 0 or value["w1"].low <= 0:
            raise ValueError("B and w1 ranges must be strictly positive")
        return value

    @classmethod
    def default(cls) -> "SamplerConfig":
        return cls(
            ranges={
                "y0": ParameterRange(low=0.002, high=0.008),
                "a": ParameterRange(low=0.3, high=0.7),
                "B": ParameterRange(low=520.0, high=538.0),
                "w1": ParameterRange(low=0.004, high=0.009),
            }
        )


class EnvironmentRecord(BaseModel):
    y0: float = Field(ge=0)
    a: float = Field(ge=0)
    v_L: float = Field(gt=0)
    w1: float = Field(gt=0)
    source_B: Optional[float] = None


class SequenceRecord(BaseModel):
    delta_t: float = Field(default=4.0, gt=0)
    actions: List[int]

    @field_validator("actions")
    @classmethod
    def _codes(cls, value: List[int]) -> List[int]:
        bad = [code for code in value if code not in (0, 1, 2, 3)]
        if bad:
            raise ValueError(f"action codes must be 0-3, got {bad}")
        return value


class TrainConfig(BaseModel):
    """Hyper-parameters of one Q-learning run."""

    model_config = ConfigDict(frozen=True)

    delta_t: float = Field(default=4.0, gt=0)
    pulses_per_segment: int = Field(default=4, ge=1)
    m: int = Field(default=3, ge=1)
    alpha: float = Field(default=0.1, gt=0, le=1)
    eps_start: float = Field(default=1.0, ge=0, le=1)
    eps_decay: float = Field(default=0.99, gt=0, le=1)
    eps_end: float = Field(default=0.05, ge=0, le=1)
    n_episodes: int = Field(default=300, ge=0)
    seed: int = Field(default=0, ge=0)
    base_sequence: Tuple[int, ...] = ()
    greedy_only: bool = False

    @field_validator("base_sequence")
    @classmethod
    def _codes(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        if any(code not in (0, 1, 2, 3) for code in value):
            raise ValueError("base_sequence codes must be 0-3")
        return tuple(value)

    @model_validator(mode="after")
    def _schedule(self) -> "TrainConfig":
        if self.eps_end > self.eps_start:
            raise ValueError("eps_end must not exceed eps_start")
        return self


class TrainRecord(BaseModel):
    env_id: int
    T: float
    actions: List[int]
    coherence: float
    episodes: int
    final_epsilon: float
    source: str = Field(default="greedy", pattern="^(greedy|episode|base)$")


class OracleRecord(BaseModel):
    env_id: int
    T: float
    actions: List[int]
    coherence: float
    mode: str = Field(pattern="^(exhaustive|incremental)$")
    evaluated_count: int = Field(ge=0)
    depth: Optional[int] = None


class ThreeComponentParams(BaseModel):
    y0: float = Field(ge=0)
    a_g: float = Field(ge=0)
    v_g: float
    w_g: float = Field(gt=0)
    a_1f: float = Field(ge=0)


class FitResultRecord(BaseModel):
    params: ThreeComponentParams
    sse: float = Field(ge=0)
    converged: bool
    iterations: int = Field(ge=0)
    initial_sse: float = Field(ge=0)
    residuals: Dict[str, List[float]]
    restart_index: int = Field(ge=0)


class CacheStats(BaseModel):
    entries: int = Field(ge=0)
    hits: int = Field(ge=0)
    misses: int = Field(ge=0)
    segments: int = Field(ge=0)
    blocks: int = Field(default=0, ge=0)
    file_size: Optional[int] = None
    path: Optional[str] = None
