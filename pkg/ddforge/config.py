"""Run configuration: defaults < JSON config file < command-line flags.

Environment variables and ``.env`` files are deliberately not consulted so a
run is fully described by its config file and flags.
"""

from __future__ import annotations

import json
from contextlib import contextmanager
from contextvars import ContextVar
from pathlib import Path
from typing import Any, Iterator, Optional, Tuple, Type

from pydantic import Field, ValidationError, field_validator, model_validator
from pydantic_settings import (
    BaseSettings,
    JsonConfigSettingsSource,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
)

from .schemas import TrainConfig
from .services.spectral import FrequencyGrid, QuadratureSettings
from .utils.errors import ConfigError, config_error_from_validation

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")

_CONFIG_FILE: ContextVar[Optional[Path]] = ContextVar("ddforge_config_file", default=None)


class Settings(BaseSettings):
    """Numerical, training and runtime options for one ddforge run."""

    model_config = SettingsConfigDict(extra="forbid", validate_default=True)

    # Sequences
    delta_t: float = Field(default=4.0, gt=0)
    pulses_per_segment: int = Field(default=4, ge=1, le=64)

    # Quadrature and frequency grid
    nodes_per_segment: int = Field(default=2000, ge=2)
    quadrature_end_correction: bool = True
    omega_min: float = Field(default=0.001, gt=0)
    omega_max: float = Field(default=8.5, gt=0)
    n_points: int = Field(default=4000, ge=2)

    # Noise environments
    gamma: float = Field(default=1.0705e-3, gt=0)
    include_two_pi: bool = True
    seed: int = Field(default=0, ge=0, lt=2**64)

    # Q-learning
    history_length: int = Field(default=3, ge=1)
    alpha: float = Field(default=0.1, gt=0, le=1)
    eps_start: float = Field(default=1.0, ge=0, le=1)
    eps_decay: float = Field(default=0.99, gt=0, le=1)
    eps_end: float = Field(default=0.05, ge=0, le=1)
    n_episodes: int = Field(default=300, ge=0)
    greedy_only: bool = False

    # Oracle
    exhaustive_limit: int = Field(default=8, ge=1, le=12)
    incremental_depth: int = Field(default=2, ge=1)
    oracle_exhaustive_max_time: float = Field(default=32.0, gt=0)

    # Sensing
    omega_s: float = Field(default=1.0, gt=0)
    filter_blind_floor: float = Field(default=1e-12, ge=0)

    # Runtime
    cache_path: Optional[str] = None
    workers: int = Field(default=1, ge=1)
    redis_url: Optional[str] = None
    log_level: str = Field(default="INFO")
    sentry_dsn: Optional[str] = None
    metrics_enabled: bool = True

    @field_validator("log_level", mode="before")
    @classmethod
    def _normalize_log_level(cls, value: str) -> str:
        level = str(value).strip().upper()
        if level not in LOG_LEVELS:
            raise ValueError(f"log_level must be one of {', '.join(LOG_LEVELS)}")
        return level

    @field_validator("cache_path", "redis_url", "sentry_dsn", mode="before")
    @classmethod
    def _blank_to_none(cls, value: Optional[str]) -> Optional[str]:
        if isinstance(value, str) and not value.strip():
            return None
        return value

    @model_validator(mode="after")
    def _consistent(self) -> "Settings":
        if self.omega_min >= self.omega_max:
            raise ValueError("omega_min must be smaller than omega_max")
        if self.eps_end > self.eps_start:
            raise ValueError("eps_end must not exceed eps_start")
        return self

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        config_file = _CONFIG_FILE.get()
        if config_file is None:
            return (init_settings,)
        return (init_settings, JsonConfigSettingsSource(settings_cls, json_file=config_file))

    def grid(self) -> FrequencyGrid:
        return FrequencyGrid(self.omega_min, self.omega_max, self.n_points)

    def quadrature(self) -> QuadratureSettings:
        return QuadratureSettings(self.nodes_per_segment, self.quadrature_end_correction)

    def sequence_options(self) -> dict[str, Any]:
        return {"delta_t": self.delta_t, "pulses_per_segment": self.pulses_per_segment}

    def train_config(self, **overrides: Any) -> TrainConfig:
        values: dict[str, Any] = {
            "delta_t": self.delta_t,
            "pulses_per_segment": self.pulses_per_segment,
            "m": self.history_length,
            "alpha": self.alpha,
            "eps_start": self.eps_start,
            "eps_decay": self.eps_decay,
            "eps_end": self.eps_end,
            "n_episodes": self.n_episodes,
            "seed": self.seed,
            "greedy_only": self.greedy_only,
        }
        values.update(overrides)
        return TrainConfig(**values)


@contextmanager
def _config_file(path: Optional[Path]) -> Iterator[None]:
    token = _CONFIG_FILE.set(path)
    try:
        yield
    finally:
        _CONFIG_FILE.reset(token)


def load_settings(config_path: str | Path | None = None, **overrides: Any) -> Settings:
    """Build settings for one run; ``None`` overrides are ignored so unset flags fall through."""

    path = Path(config_path) if config_path else None
    if path is not None:
        if not path.is_file():
            raise ConfigError(f"config file {path} does not exist", field="config")
        try:
            document = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}", field="config") from exc
        if not isinstance(document, dict):
            raise ConfigError(f"config file {path} must hold a JSON object", field="config")
    values = {key: value for key, value in overrides.items() if value is not None}
    with _config_file(path):
        try:
            return Settings(**values)
        except ValidationError as exc:
            raise config_error_from_validation(exc) from exc
