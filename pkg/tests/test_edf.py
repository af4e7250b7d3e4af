import datetime
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stpool_eeg.edf import (
    EdfHeader,
    Event,
    SignalHeader,
    calibrate,
    encode_annotations,
    parse_annotations,
    parse_edf_header,
    read_edf,
    read_signals,
    serialize_edf_header,
    write_edf,
)
from stpool_eeg.errors import (
    DegenerateCalibrationError,
    MalformedTalError,
    NegativeOnsetError,
    NonNumericFieldError,
    TruncatedHeaderError,
    TruncatedRecordsError,
)


def make_header(n_signals=2, spr=4, n_records=3):
    sigs = tuple(
        SignalHeader(f"ch{i}", -1000.0, 1000.0, -32768, 32767, spr, physical_dimension="uV")
        for i in range(n_signals)
    )
    return EdfHeader(
        version=0,
        patient_id="X X X X",
        recording_id="Startdate X",
        start_datetime=datetime.datetime(2009, 8, 12, 16, 15, 0),
        header_bytes=256 * (n_signals + 1),
        n_records=n_records,
        record_duration=1.0,
        signals=sigs,
    )


def test_version_field():
    raw = serialize_edf_header(make_header())
    assert raw.startswith(b"0       ")
    assert parse_edf_header(raw).version == 0


def test_signal_count_sets_header_size():
    h = parse_edf_header(serialize_edf_header(make_header(n_signals=64)))
    assert h.n_signals == 64
    assert h.header_bytes == 16640


def test_truncated_header():
    raw = serialize_edf_header(make_header(n_signals=64))
    with pytest.raises(TruncatedHeaderError):
        parse_edf_header(raw[:300])
    with pytest.raises(TruncatedHeaderError):
        parse_edf_header(b"0" * 100)


def test_non_numeric_field_reports_offset():
    raw = bytearray(serialize_edf_header(make_header()))
    raw[236:244] = b"ab      "  # n_records
    with pytest.raises(NonNumericFieldError) as info:
        parse_edf_header(bytes(raw))
    assert info.value.offset == 236
    assert "n_records" in str(info.value)


def test_header_round_trip_is_byte_identical():
    raw = serialize_edf_header(make_header(n_signals=5))
    assert serialize_edf_header(parse_edf_header(raw)) == raw


def test_calibration_endpoints():
    sig = SignalHeader("x", -1000.0, 1000.0, -32768, 32767, 1)
    assert calibrate(np.array([-32768]), sig)[0] == -1000.0
    assert calibrate(np.array([32767]), sig)[0] == 1000.0


def test_calibration_of_zero_matches_exact_rational():
    sig = SignalHeader("x", -1000.0, 1000.0, -32768, 32767, 1)
    exact = Fraction(0 + 32768) * Fraction(2000) / Fraction(65535) - 1000
    got = calibrate(np.array([0]), sig)[0]
    assert got == pytest.approx(float(exact), abs=1e-12)
    assert got == pytest.approx(0.015259, abs=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-32768, 32767), min_size=2, max_size=20))
def test_calibration_is_affine(values):
    sig = SignalHeader("x", -250.5, 731.25, -2048, 2047, 1)
    d = np.array(values)
    p = calibrate(d, sig)
    gain = (sig.physical_max - sig.physical_min) / (sig.digital_max - sig.digital_min)
    np.testing.assert_allclose(p[1:] - p[0], gain * (d[1:] - d[0]), atol=1e-9)


def test_degenerate_calibration():
    h = make_header()
    bad = SignalHeader("x", -1.0, 1.0, 5, 5, 4)
    h = EdfHeader(**{**h.__dict__, "signals": (bad,)})
    with pytest.raises(DegenerateCalibrationError):
        read_signals(h, bytes(2 * 4 * 3))


def test_read_signals_layout_and_truncation():
    h = make_header(n_signals=2, spr=4, n_records=3)
    digital = np.arange(24, dtype="<i2").reshape(3, 2, 4)  # record, signal, sample
    rec = read_signals(h, digital.tobytes())
    assert rec.sample_rate_hz == 4
    sig = h.signals[0]
    expected0 = calibrate(digital[:, 0, :].reshape(-1), sig)
    np.testing.assert_array_equal(rec.samples[0], expected0)
    with pytest.raises(TruncatedRecordsError):
        read_signals(h, digital.tobytes()[:-2])


def test_tal_examples():
    assert parse_annotations(b"+0\x14\x14\x00") == []
    assert parse_annotations(b"+4.1\x1521\x14T1\x14\x00") == [Event(4.1, 21.0, "T1")]
    with pytest.raises(MalformedTalError):
        parse_annotations(b"+4.1\x1521\x14T1\x14")
    with pytest.raises(NegativeOnsetError):
        parse_annotations(b"-1\x14T1\x14\x00")


def test_tal_multiple_texts_and_padding():
    stream = b"+2\x14A\x14B\x14\x00\x00\x00+3.5\x14C\x14\x00\x00"
    assert parse_annotations(stream) == [Event(2.0, 0.0, "A"), Event(2.0, 0.0, "B"), Event(3.5, 0.0, "C")]


event_strategy = st.builds(
    Event,
    st.integers(0, 10_000).map(lambda x: x / 8),
    st.integers(0, 100).map(lambda x: x / 4),
    st.sampled_from(["T0", "T1", "T2", "note"]),
)


@settings(max_examples=60, deadline=None)
@given(st.lists(event_strategy, max_size=6), st.lists(event_strategy, max_size=6))
def test_tal_concatenation(a, b):
    sa, sb = encode_annotations(a, timekeeping_onset=0), encode_annotations(b)
    assert parse_annotations(sa + sb) == parse_annotations(sa) + parse_annotations(sb)
    assert parse_annotations(sa + sb) == a + b


def test_write_then_read_file(tmp_path):
    rng = np.random.default_rng(0)
    digital = rng.integers(-32768, 32768, size=(3, 320)).astype(np.int16)
    events = [Event(0.0, 1.0, "T0"), Event(1.0, 0.5, "T2")]
    write_edf(tmp_path / "a.edf", ["A", "B", "C"], digital, 160, events=events)
    edf = read_edf(tmp_path / "a.edf")
    assert edf.recording.channel_labels == ["A", "B", "C"]
    assert edf.recording.sample_rate_hz == 160
    assert edf.events == events
    np.testing.assert_array_equal(edf.recording.samples, calibrate(digital, edf.header.signals[0]))
