import math

import numpy as np
import pytest

from ddforge.schemas import SamplerConfig
from ddforge.services.noise_model import (
    EnvironmentSampler,
    GaussianNsd,
    ThreeComponentNsd,
    environments_from_records,
    environments_to_records,
    evaluate_nsd,
    larmor_from_field,
    sample_environments,
)
from ddforge.utils.errors import ConfigError, DomainError


def test_gaussian_peak_value():
    nsd = GaussianNsd(y0=0.005, a=0.5, v_L=3.5, w1=0.006)

    assert nsd(3.5) == pytest.approx(0.505)


def test_zero_amplitude_reduces_to_floor():
    nsd = GaussianNsd(y0=0.005, a=0.0, v_L=3.5, w1=0.006)
    values = evaluate_nsd(nsd, np.array([0.0, 1.0, 3.5, 8.0]))

    assert np.allclose(values, 0.005)


def test_three_component_pure_one_over_f():
    nsd = ThreeComponentNsd(y0=0.0, a_g=0.0, v_g=2.0, w_g=0.5, a_1f=2.0)

    assert nsd(4.0) == pytest.approx(0.5)


def test_three_component_rejects_non_positive_omega():
    nsd = ThreeComponentNsd(y0=0.0, a_g=0.0, v_g=2.0, w_g=0.5, a_1f=2.0)

    with pytest.raises(DomainError):
        nsd(0.0)
    with pytest.raises(DomainError):
        evaluate_nsd(nsd, np.array([1.0, -1.0]))


def test_gaussian_rejects_negative_omega_and_bad_parameters():
    with pytest.raises(DomainError):
        GaussianNsd(y0=0.005, a=0.5, v_L=3.5, w1=0.006)(-1.0)
    with pytest.raises(DomainError):
        GaussianNsd(y0=0.005, a=0.5, v_L=3.5, w1=0.0)
    with pytest.raises(DomainError):
        GaussianNsd(y0=-0.1, a=0.5, v_L=3.5, w1=0.006)


def test_larmor_conversion():
    assert larmor_from_field(520) == pytest.approx(2 * math.pi * 1.0705e-3 * 520)
    assert larmor_from_field(520) == pytest.approx(3.4975, abs=1e-4)
    assert larmor_from_field(538) == pytest.approx(3.6186, abs=1e-4)
    assert larmor_from_field(520, include_two_pi=False) == pytest.approx(1.0705e-3 * 520)


def test_larmor_rejects_zero_field():
    with pytest.raises(DomainError):
        larmor_from_field(0)


def test_sampled_environments_stay_in_range():
    sampler = EnvironmentSampler(count=1000, seed=7)
    environments = sample_environments(sampler)

    assert len(environments) == 1000
    low_v, high_v = larmor_from_field(520), larmor_from_field(538)
    for env in environments:
        assert 0.002 <= env.y0 <= 0.008
        assert 0.3 <= env.a <= 0.7
        assert 0.004 <= env.w1 <= 0.009
        assert 520 <= env.source_B <= 538
        assert low_v <= env.v_L <= high_v


def test_degenerate_ranges_give_exact_parameters():
    sampler = EnvironmentSampler(
        count=1,
        ranges={"y0": (0.004, 0.004), "a": (0.5, 0.5), "B": (530.0, 530.0), "w1": (0.007, 0.007)},
    )
    (env,) = sample_environments(sampler)

    assert (env.y0, env.a, env.w1, env.source_B) == (0.004, 0.5, 0.007, 530.0)
    assert env.v_L == larmor_from_field(530.0)


def test_same_seed_reproduces_bit_for_bit():
    first = sample_environments(EnvironmentSampler(count=25, seed=11))
    second = sample_environments(EnvironmentSampler(count=25, seed=11))
    other = sample_environments(EnvironmentSampler(count=25, seed=12))

    assert first == second
    assert first != other


def test_sampler_validation():
    with pytest.raises(ConfigError) as missing:
        EnvironmentSampler(ranges={"y0": (0.0, 1.0)})
    assert missing.value.field == "ranges"

    with pytest.raises(ConfigError):
        EnvironmentSampler(count=0)
    with pytest.raises(ConfigError):
        EnvironmentSampler(ranges={"y0": (0.1, 0.0), "a": (0, 1), "B": (1, 2), "w1": (0.1, 0.2)})


def test_sampler_from_config():
    config = SamplerConfig.default().model_copy(update={"count": 3, "seed": 5})
    environments = sample_environments(EnvironmentSampler.from_config(config))

    assert len(environments) == 3
    assert environments == sample_environments(EnvironmentSampler(count=3, seed=5))


def test_environment_records_round_trip():
    environments = sample_environments(EnvironmentSampler(count=4, seed=3))

    assert environments_from_records(environments_to_records(environments)) == environments
