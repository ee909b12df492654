import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run desk-scale reproduction tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def quadrature():
    from ddforge.services.spectral import QuadratureSettings

    return QuadratureSettings(nodes_per_segment=400)


@pytest.fixture
def grid():
    """Coarse grid that keeps the quadrature cheap while covering the Larmor band."""

    from ddforge.services.spectral import FrequencyGrid

    return FrequencyGrid(omega_min=0.01, omega_max=8.5, n_points=600)


@pytest.fixture
def cache(quadrature):
    from ddforge.services.spectral import TransformCache

    return TransformCache(quadrature)


@pytest.fixture
def nsd():
    from ddforge.services.noise_model import GaussianNsd

    return GaussianNsd(y0=0.005, a=0.5, v_L=3.55, w1=0.006)


@pytest.fixture
def write_envs(tmp_path):
    """Write an environments file and return its path."""

    import json

    def _write(records=None, name="envs.json"):
        records = records or [
            {"y0": 0.005, "a": 0.5, "v_L": 3.55, "w1": 0.006, "source_B": None},
            {"y0": 0.003, "a": 0.4, "v_L": 3.5, "w1": 0.008, "source_B": None},
        ]
        path = tmp_path / name
        path.write_text(json.dumps(records), encoding="utf-8")
        return path

    return _write
