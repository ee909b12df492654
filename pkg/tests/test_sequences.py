import math

import pytest

from ddforge.services.sequences import (
    DdSequence,
    Segment,
    SegmentKind,
    cpmg_waveform,
    pulse_times,
    ramsey_waveform,
    segment_parity,
    segments_for_time,
    sequence_from_codes,
)
from ddforge.utils.errors import ConfigError, DomainError


def test_pulse_times_by_kind():
    assert pulse_times(Segment(SegmentKind.FID, 0, 0.0, 4.0)) == ()
    assert pulse_times(Segment(SegmentKind.Hahn, 1, 0.0, 4.0)) == (2.0,)
    assert pulse_times(Segment(SegmentKind.CPMG, 4, 0.0, 4.0)) == pytest.approx((0.5, 1.5, 2.5, 3.5))


def test_udd_pulse_times():
    times = pulse_times(Segment(SegmentKind.UDD, 4, 0.0, 4.0))
    expected = [4 * math.sin(j * math.pi / 10) ** 2 for j in range(1, 5)]

    assert times == pytest.approx(expected)
    assert times == pytest.approx((0.382, 1.382, 2.618, 3.618), abs=1e-3)


def test_pulse_times_are_interior_and_increasing():
    for kind, n in ((SegmentKind.Hahn, 1), (SegmentKind.CPMG, 7), (SegmentKind.UDD, 7)):
        segment = Segment(kind, n, 8.0, 12.0)
        times = pulse_times(segment)
        assert all(8.0 < t < 12.0 for t in times)
        assert all(b > a for a, b in zip(times, times[1:]))


def test_segment_validation():
    with pytest.raises(DomainError):
        Segment(SegmentKind.FID, 1, 0.0, 4.0)
    with pytest.raises(DomainError):
        Segment(SegmentKind.Hahn, 2, 0.0, 4.0)
    with pytest.raises(DomainError):
        Segment(SegmentKind.CPMG, 4, 4.0, 4.0)


def test_segment_parity():
    assert segment_parity(Segment(SegmentKind.FID, 0, 0.0, 4.0)) == 1
    assert segment_parity(Segment(SegmentKind.Hahn, 1, 0.0, 4.0)) == -1
    assert segment_parity(Segment(SegmentKind.CPMG, 4, 0.0, 4.0)) == 1
    assert segment_parity(Segment(SegmentKind.UDD, 3, 0.0, 4.0)) == -1


def test_modulation_all_fid_is_constant():
    sequence = DdSequence.pure("FID", 3)

    assert {sequence.modulation_value(t) for t in (0.0, 1.3, 6.0, 12.0)} == {1}


def test_modulation_hahn_flips_at_midpoint():
    sequence = DdSequence.from_names("Hahn")

    assert sequence.modulation_value(1.0) == 1
    assert sequence.modulation_value(3.0) == -1
    # pulse instant already carries the flipped sign
    assert sequence.modulation_value(2.0) == -1


def test_entry_parity_carries_across_segments():
    sequence = DdSequence.from_names("Hahn|FID")

    assert sequence.entry_parities == (1, -1)
    assert sequence.modulation_value(5.0) == -1
    assert list(sequence.modulation([1.0, 3.0, 5.0, 7.9])) == [1, -1, -1, -1]


def test_vectorised_modulation_matches_scalar():
    sequence = sequence_from_codes([1, 2, 3, 0, 1])
    times = [0.0, 0.7, 2.0, 4.4, 9.1, 13.0, 17.5, 19.99]

    assert list(sequence.modulation(times)) == [sequence.modulation_value(t) for t in times]


def test_modulation_outside_interval():
    sequence = DdSequence.pure("CPMG", 2)

    with pytest.raises(DomainError):
        sequence.modulation_value(8.5)
    with pytest.raises(DomainError):
        sequence.modulation([-0.1])


def test_segments_are_contiguous():
    sequence = sequence_from_codes([2, 1, 3], delta_t=4.0, pulses_per_segment=6)

    assert [(s.t_start, s.t_end) for s in sequence.segments] == [(0.0, 4.0), (4.0, 8.0), (8.0, 12.0)]
    assert [s.n_pulses for s in sequence.segments] == [6, 1, 6]
    assert sequence.total_time == 12.0
    assert sequence.total_pulses == 13


def test_names_and_json():
    sequence = DdSequence.from_names("CPMG|Hahn|UDD|FID")

    assert sequence.codes == (2, 1, 3, 0)
    assert sequence.names == "CPMG|Hahn|UDD|FID"
    assert DdSequence.from_json(sequence.to_json()) == sequence


def test_segment_kind_parse():
    assert SegmentKind.parse("cpmg") is SegmentKind.CPMG
    assert SegmentKind.parse("3") is SegmentKind.UDD
    assert SegmentKind.parse(1) is SegmentKind.Hahn
    with pytest.raises(DomainError):
        SegmentKind.parse("XY4")
    with pytest.raises(DomainError):
        SegmentKind.parse(7)


def test_segments_for_time():
    assert segments_for_time(200.0) == 50
    assert segments_for_time(12.0, 3.0) == 4
    with pytest.raises(ConfigError):
        segments_for_time(10.0)
    with pytest.raises(ConfigError):
        segments_for_time(0.0)


def test_whole_interval_waveforms():
    ramsey = ramsey_waveform(6.0)
    cpmg = cpmg_waveform(16.0, 8)

    assert ramsey.kind is SegmentKind.FID and ramsey.duration == 6.0
    assert pulse_times(cpmg) == pytest.approx([(j - 0.5) * 2.0 for j in range(1, 9)])
