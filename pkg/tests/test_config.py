import json

import pytest

from ddforge.config import Settings, load_settings
from ddforge.utils.errors import ConfigError


def _write_config(tmp_path, payload, name="ddforge.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def test_defaults():
    settings = load_settings()

    assert settings.delta_t == 4.0
    assert settings.pulses_per_segment == 4
    assert (settings.omega_min, settings.omega_max, settings.n_points) == (0.001, 8.5, 4000)
    assert settings.nodes_per_segment == 2000
    assert settings.omega_s == 1.0
    assert settings.eps_end == 0.05
    assert settings.exhaustive_limit == 8
    assert settings.workers == 1
    assert settings.cache_path is None


def test_config_file_overrides_defaults(tmp_path):
    path = _write_config(tmp_path, {"seed": 42, "n_points": 800, "log_level": "debug"})

    settings = load_settings(path)

    assert settings.seed == 42
    assert settings.n_points == 800
    assert settings.log_level == "DEBUG"


def test_flags_override_config_file(tmp_path):
    path = _write_config(tmp_path, {"seed": 42, "workers": 2})

    settings = load_settings(path, seed=7, workers=None)

    assert settings.seed == 7
    assert settings.workers == 2


def test_environment_is_not_consulted(monkeypatch):
    monkeypatch.setenv("SEED", "99")
    monkeypatch.setenv("DDFORGE_SEED", "99")

    assert load_settings().seed == 0


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError) as excinfo:
        load_settings(tmp_path / "absent.json")

    assert excinfo.value.field == "config"


def test_invalid_config_documents(tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError) as excinfo:
        load_settings(broken)
    assert excinfo.value.field == "config"

    with pytest.raises(ConfigError):
        load_settings(_write_config(tmp_path, [1, 2, 3], name="list.json"))


def test_unknown_fields_are_rejected(tmp_path):
    with pytest.raises(ConfigError) as excinfo:
        load_settings(_write_config(tmp_path, {"learning_rate": 0.5}))

    assert excinfo.value.field == "learning_rate"


def test_field_validation_names_the_field(tmp_path):
    with pytest.raises(ConfigError) as excinfo:
        load_settings(_write_config(tmp_path, {"delta_t": -1.0}))

    assert excinfo.value.field == "delta_t"
    assert "delta_t" in str(excinfo.value)


def test_frequency_bounds_must_be_ordered():
    with pytest.raises(ConfigError):
        load_settings(omega_min=9.0, omega_max=8.5)


def test_log_level_is_checked():
    with pytest.raises(ConfigError):
        load_settings(log_level="verbose")


def test_blank_optional_strings_become_none():
    settings = load_settings(cache_path="  ", redis_url="")

    assert settings.cache_path is None
    assert settings.redis_url is None


def test_derived_objects():
    settings = Settings(omega_min=0.5, omega_max=4.0, n_points=100, nodes_per_segment=300, history_length=2)

    grid = settings.grid()
    assert (grid.omega_min, grid.omega_max, grid.n_points) == (0.5, 4.0, 100)
    assert settings.quadrature().nodes_per_segment == 300
    assert settings.sequence_options() == {"delta_t": 4.0, "pulses_per_segment": 4}

    config = settings.train_config(n_episodes=12)
    assert config.m == 2
    assert config.n_episodes == 12
    assert config.eps_end == 0.05
