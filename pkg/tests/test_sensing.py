import math

import pytest

from ddforge.services.noise_model import GaussianNsd
from ddforge.services.sensing import (
    DEFAULT_OMEGA_S,
    SUMMARY_HEADER,
    compare_strategies,
    sensitivity_curve,
    sensitivity_metric,
)
from ddforge.services.sequences import DdSequence
from ddforge.utils.errors import DomainError, FilterBlindError, PreconditionError

SILENT = GaussianNsd(y0=0.0, a=0.0, v_L=3.5, w1=0.006)
OMEGA = 2.0


def test_default_target_frequency():
    assert DEFAULT_OMEGA_S == 1.0


def test_noise_free_dc_limit(grid, cache):
    result = sensitivity_metric(DdSequence.pure("FID", 2), SILENT, 1e-6, grid, cache)

    assert result.w == 1.0
    assert result.y_mag == pytest.approx(8.0, rel=1e-6)
    assert result.metric_m == pytest.approx(1 / math.sqrt(8.0), rel=1e-6)


def test_metric_definition(grid, cache, nsd):
    result = sensitivity_metric(DdSequence.pure("CPMG", 3), nsd, OMEGA, grid, cache)

    assert result.T == 12.0
    assert result.metric_m == pytest.approx(math.sqrt(12.0) / (result.w * result.y_mag))


def test_response_is_independent_of_noise(grid, cache, nsd):
    sequence = DdSequence.pure("UDD", 2)
    quiet = sensitivity_metric(sequence, SILENT, OMEGA, grid, cache)
    noisy = sensitivity_metric(sequence, nsd, OMEGA, grid, cache)

    assert quiet.y_mag == noisy.y_mag
    assert noisy.w < quiet.w
    assert noisy.metric_m > quiet.metric_m


def test_filter_blind_sequence(grid, cache):
    blind_omega = 2 * math.pi / 4.0

    with pytest.raises(FilterBlindError):
        sensitivity_metric(DdSequence.pure("FID", 1), SILENT, blind_omega, grid, cache, blind_floor=1e-6)


def test_whole_period_segments_are_blind_at_one_megahertz(grid, cache):
    # every 4 µs segment kind integrates whole periods to zero at 2π rad/µs
    for codes in ([0, 0], [1, 1], [2, 2], [3, 3], [2, 1, 3, 0]):
        sequence = DdSequence(tuple(codes))
        with pytest.raises(FilterBlindError):
            sensitivity_metric(sequence, SILENT, 2 * math.pi, grid, cache, blind_floor=1e-6)

    assert sensitivity_metric(DdSequence.pure("UDD", 2), SILENT, OMEGA, grid, cache).y_mag > 1e-3


def test_pure_strategies_respond_at_default_target(grid, cache, nsd):
    for name in ("FID", "Hahn", "CPMG", "UDD"):
        result = sensitivity_metric(DdSequence.pure(name, 2), nsd, DEFAULT_OMEGA_S, grid, cache)

        assert result.y_mag > 1e-2, name
        assert math.isfinite(result.metric_m), name


def test_vanishing_coherence_gives_infinite_metric(grid, cache):
    loud = GaussianNsd(y0=1e6, a=0.0, v_L=3.5, w1=0.006)
    result = sensitivity_metric(DdSequence.pure("CPMG", 2), loud, OMEGA, grid, cache)

    assert result.w == 0.0
    assert math.isinf(result.metric_m)


def test_rejects_non_positive_target(grid, cache, nsd):
    with pytest.raises(DomainError):
        sensitivity_metric(DdSequence.pure("CPMG", 1), nsd, 0.0, grid, cache)


def test_single_strategy_ratio_is_one(grid, cache, nsd):
    comparison = compare_strategies({"CPMG": DdSequence.pure("CPMG", 2)}, [nsd], OMEGA, grid, cache)
    (summary,) = comparison.summaries

    assert summary.ratio_to_best == 1.0
    assert summary.environments == 1
    assert summary.geometric_mean == pytest.approx(summary.arithmetic_mean)


def test_identical_strategies_give_identical_rows(grid, cache, nsd):
    other = GaussianNsd(y0=0.003, a=0.4, v_L=3.5, w1=0.008)
    sequence = DdSequence.pure("UDD", 2)
    comparison = compare_strategies({"a": sequence, "b": sequence}, [nsd, other], OMEGA, grid, cache)

    rows_a = [row[1:] for row in comparison.rows if row[0] == "a"]
    rows_b = [row[1:] for row in comparison.rows if row[0] == "b"]
    assert rows_a == rows_b
    assert comparison.by_name()["a"].ratio_to_best == comparison.by_name()["b"].ratio_to_best == 1.0


def test_geometric_mean_and_ratios(grid, cache, nsd):
    other = GaussianNsd(y0=0.003, a=0.4, v_L=3.5, w1=0.008)
    strategies = {"CPMG": DdSequence.pure("CPMG", 2), "Hahn": DdSequence.pure("Hahn", 2)}
    comparison = compare_strategies(strategies, [nsd, other], OMEGA, grid, cache)

    for name, summary in comparison.by_name().items():
        values = [row[-1] for row in comparison.rows if row[0] == name]
        assert summary.geometric_mean == pytest.approx(math.sqrt(values[0] * values[1]))
        assert summary.arithmetic_mean == pytest.approx(sum(values) / 2)
    assert min(s.ratio_to_best for s in comparison.summaries) == 1.0
    assert all(len(row) == len(SUMMARY_HEADER) for row in comparison.summary_rows())


def test_per_environment_sequences(grid, cache, nsd):
    other = GaussianNsd(y0=0.003, a=0.4, v_L=3.5, w1=0.008)
    trained = [DdSequence.from_names("CPMG|UDD"), DdSequence.from_names("UDD|CPMG")]
    comparison = compare_strategies({"trained": trained}, [nsd, other], OMEGA, grid, cache)

    assert [row[1] for row in comparison.rows] == [0, 1]

    with pytest.raises(PreconditionError):
        compare_strategies({"trained": trained[:1]}, [nsd, other], OMEGA, grid, cache)


def test_compare_requires_inputs(grid, cache, nsd):
    with pytest.raises(PreconditionError):
        compare_strategies({}, [nsd], OMEGA, grid, cache)
    with pytest.raises(PreconditionError):
        compare_strategies({"CPMG": DdSequence.pure("CPMG", 1)}, [], OMEGA, grid, cache)


def test_sensitivity_curve(grid, cache, nsd):
    results = sensitivity_curve([DdSequence.pure("CPMG", n) for n in (1, 2, 3)], nsd, OMEGA, grid, cache)

    assert [r.T for r in results] == [4.0, 8.0, 12.0]
