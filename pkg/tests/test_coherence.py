import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from ddforge.services.coherence import (
    CSV_HEADER,
    chi_from_filter,
    coherence,
    coherence_curve,
    coherence_value,
    decoherence_chi,
    evaluate_batch,
    waveform_coherence,
)
from ddforge.services.noise_model import GaussianNsd
from ddforge.services.sequences import DdSequence, ramsey_waveform, sequence_from_codes
from ddforge.services.spectral import FrequencyGrid
from ddforge.utils.errors import PreconditionError


def _fid_filter(omegas, total_time):
    return 4 * np.sin(omegas * total_time / 2) ** 2 / omegas**2


def test_zero_noise_keeps_full_coherence(grid, cache):
    silent = GaussianNsd(y0=0.0, a=0.0, v_L=3.5, w1=0.006)

    for codes in ([0], [1, 2], [3, 3, 0], [2, 1, 3, 0]):
        result = coherence(sequence_from_codes(codes), silent, grid, cache)
        assert result.chi == 0.0
        assert result.w == 1.0


def test_chi_of_ln2_gives_half(grid):
    flat = GaussianNsd(y0=0.25, a=0.0, v_L=3.5, w1=0.006)
    omegas = grid.omegas
    span = omegas[-1] - omegas[0]
    filter_values = omegas**2 * math.pi * math.log(2) / (0.25 * span)

    chi = chi_from_filter(filter_values, flat, grid)

    assert chi == pytest.approx(math.log(2), rel=1e-12)
    assert math.exp(-chi) == pytest.approx(0.5)


def test_constant_spectrum_matches_analytic_fid_filter(cache):
    grid = FrequencyGrid(omega_min=0.5, omega_max=8.5, n_points=800)
    flat = GaussianNsd(y0=0.01, a=0.0, v_L=3.5, w1=0.006)
    sequence = DdSequence.pure("FID", 2)

    chi = decoherence_chi(sequence, flat, grid, cache)
    analytic = trapezoid(0.01 * _fid_filter(grid.omegas, 8.0) / grid.omegas**2, grid.omegas) / math.pi
    fine = grid.refined(10).omegas
    reference = trapezoid(0.01 * _fid_filter(fine, 8.0) / fine**2, fine) / math.pi

    assert chi == pytest.approx(analytic, rel=1e-6)
    assert chi == pytest.approx(reference, rel=2e-3)


def test_coherence_result_fields(grid, cache, nsd):
    result = coherence(DdSequence.pure("CPMG", 2), nsd, grid, cache, nsd_id=4)

    assert result.T == 8.0
    assert result.sequence_id == "CPMG"
    assert result.nsd_id == 4
    assert 0.0 < result.w <= 1.0
    assert result.w == pytest.approx(math.exp(-result.chi))
    assert len(result.csv_row()) == len(CSV_HEADER)
    assert coherence_value(DdSequence.pure("CPMG", 2), nsd, grid, cache) == result.w


def test_decoupling_beats_free_evolution(grid, cache, nsd):
    fid = coherence_value(DdSequence.pure("FID", 4), nsd, grid, cache)
    cpmg = coherence_value(DdSequence.pure("CPMG", 4), nsd, grid, cache)

    assert cpmg > fid


def test_whole_interval_ramsey_equals_segmented_fid(grid, cache, nsd):
    whole = waveform_coherence(ramsey_waveform(8.0), nsd, grid, cache)
    segmented = coherence_value(DdSequence.pure("FID", 2), nsd, grid, cache)

    assert whole == pytest.approx(segmented, rel=1e-6)


def test_coherence_curve_follows_segment_counts(grid, cache, nsd):
    results = coherence_curve(lambda n: DdSequence.pure("UDD", n), nsd, [1, 2, 3], grid, cache)

    assert [r.T for r in results] == [4.0, 8.0, 12.0]


def test_evaluate_batch_broadcasts_single_sequence(grid, cache, nsd):
    other = GaussianNsd(y0=0.003, a=0.4, v_L=3.5, w1=0.008)
    results = evaluate_batch([DdSequence.pure("CPMG", 1)], [nsd, other], grid, cache, sequence_id="CPMG")

    assert [r.nsd_id for r in results] == [0, 1]
    assert results[0].w != results[1].w


def test_evaluate_batch_rejects_length_mismatch(grid, cache, nsd):
    sequences = [DdSequence.pure("CPMG", 1), DdSequence.pure("FID", 1)]

    with pytest.raises(PreconditionError):
        evaluate_batch(sequences, [nsd, nsd, nsd], grid, cache)
