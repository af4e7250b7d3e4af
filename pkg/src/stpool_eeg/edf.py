"""EDF / EDF+ reading.

Only the subset of the format needed for 16-bit EEG recordings is handled:
fixed-width ASCII header, little-endian int16 data records and EDF+
time-stamped annotation lists (TALs).  A header writer is included so that
parsed headers can be re-serialized and fixtures can be generated.
"""

from __future__ import annotations

import datetime
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateCalibrationError,
    InvalidHeaderError,
    IoFailure,
    MalformedTalError,
    NegativeOnsetError,
    NonNumericFieldError,
    TruncatedHeaderError,
    TruncatedRecordsError,
)

ANNOTATION_LABEL = "EDF Annotations"

# (name, width) of the global header fields, in file order
_GLOBAL_FIELDS = (
    ("version", 8),
    ("patient_id", 80),
    ("recording_id", 80),
    ("start_date", 8),
    ("start_time", 8),
    ("header_bytes", 8),
    ("reserved", 44),
    ("n_records", 8),
    ("record_duration", 8),
    ("n_signals", 4),
)

# per-signal fields; stored field-major after the global block
_SIGNAL_FIELDS = (
    ("label", 16),
    ("transducer", 80),
    ("physical_dimension", 8),
    ("physical_min", 8),
    ("physical_max", 8),
    ("digital_min", 8),
    ("digital_max", 8),
    ("prefilter", 80),
    ("samples_per_record", 8),
    ("reserved", 32),
)


@dataclass(frozen=True)
class SignalHeader:
    label: str
    physical_min: float
    physical_max: float
    digital_min: int
    digital_max: int
    samples_per_record: int
    transducer: str = ""
    physical_dimension: str = ""
    prefilter: str = ""
    reserved: str = ""

    @property
    def is_annotation(self) -> bool:
        return self.label == ANNOTATION_LABEL

    @property
    def gain(self) -> float:
        return (self.physical_max - self.physical_min) / (self.digital_max - self.digital_min)


@dataclass(frozen=True)
class EdfHeader:
    version: int
    patient_id: str
    recording_id: str
    start_datetime: datetime.datetime
    header_bytes: int
    n_records: int
    record_duration: float
    signals: tuple[SignalHeader, ...]
    reserved: str = ""

    @property
    def n_signals(self) -> int:
        return len(self.signals)

    @property
    def record_samples(self) -> int:
        return sum(s.samples_per_record for s in self.signals)

    @property
    def payload_bytes(self) -> int:
        return self.n_records * self.record_samples * 2


@dataclass
class EEGRecording:
    channel_labels: list[str]
    sample_rate_hz: float
    samples: np.ndarray  # (channels, time), physical units

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2 or self.samples.shape[0] != len(self.channel_labels):
            raise InvalidHeaderError(
                f"samples shape {self.samples.shape} does not match {len(self.channel_labels)} labels"
            )

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz


@dataclass(frozen=True)
class Event:
    onset_s: float
    duration_s: float
    label: str


@dataclass
class EdfFile:
    header: EdfHeader
    recording: EEGRecording
    events: list[Event] = field(default_factory=list)


def _text(raw: bytes) -> str:
    return raw.decode("ascii", errors="replace").rstrip(" ")


def _number(raw: bytes, name: str, offset: int, kind=int):
    text = _text(raw).strip()
    try:
        if kind is int:
            return int(text)
        return float(text)
    except ValueError:
        raise NonNumericFieldError(name, offset, text) from None


def _parse_start(date: str, time: str, offset: int) -> datetime.datetime:
    try:
        dd, mm, yy = (int(p) for p in date.split("."))
        hh, mi, ss = (int(p) for p in time.split("."))
    except ValueError:
        raise NonNumericFieldError("start_date/start_time", offset, f"{date} {time}") from None
    # EDF two-digit year clipping rule
    year = 1900 + yy if yy >= 85 else 2000 + yy
    try:
        return datetime.datetime(year, mm, dd, hh, mi, ss)
    except ValueError:
        raise NonNumericFieldError("start_date/start_time", offset, f"{date} {time}") from None


def parse_edf_header(data: bytes) -> EdfHeader:
    """Decode the fixed-width ASCII header at the start of ``data``."""
    if len(data) < 256:
        raise TruncatedHeaderError(f"EDF header needs at least 256 bytes, got {len(data)}")

    raw = {}
    offsets = {}
    pos = 0
    for name, width in _GLOBAL_FIELDS:
        raw[name] = data[pos : pos + width]
        offsets[name] = pos
        pos += width

    version = _number(raw["version"], "version", offsets["version"])
    n_signals = _number(raw["n_signals"], "n_signals", offsets["n_signals"])
    if n_signals < 0:
        raise InvalidHeaderError(f"negative signal count {n_signals}")
    header_bytes = _number(raw["header_bytes"], "header_bytes", offsets["header_bytes"])
    expected = 256 * (n_signals + 1)
    if len(data) < expected:
        raise TruncatedHeaderError(
            f"header declares {n_signals} signals ({expected} bytes) but only {len(data)} bytes supplied"
        )
    if header_bytes != expected:
        raise InvalidHeaderError(f"header_bytes field {header_bytes} != 256*(n_signals+1) = {expected}")
    n_records = _number(raw["n_records"], "n_records", offsets["n_records"])
    if n_records < 0:
        raise InvalidHeaderError(f"unsupported record count {n_records}")
    duration = _number(raw["record_duration"], "record_duration", offsets["record_duration"], float)
    start = _parse_start(_text(raw["start_date"]), _text(raw["start_time"]), offsets["start_date"])

    columns = {}
    for name, width in _SIGNAL_FIELDS:
        column = []
        for i in range(n_signals):
            column.append((pos, data[pos : pos + width]))
            pos += width
        columns[name] = column

    signals = []
    for i in range(n_signals):

        def num(name, kind=int):
            off, chunk = columns[name][i]
            return _number(chunk, f"{name}[{i}]", off, kind)

        sig = SignalHeader(
            label=_text(columns["label"][i][1]),
            transducer=_text(columns["transducer"][i][1]),
            physical_dimension=_text(columns["physical_dimension"][i][1]),
            physical_min=num("physical_min", float),
            physical_max=num("physical_max", float),
            digital_min=num("digital_min"),
            digital_max=num("digital_max"),
            prefilter=_text(columns["prefilter"][i][1]),
            samples_per_record=num("samples_per_record"),
            reserved=_text(columns["reserved"][i][1]),
        )
        if sig.samples_per_record < 1:
            raise InvalidHeaderError(f"signal {i} has samples_per_record {sig.samples_per_record}")
        signals.append(sig)

    return EdfHeader(
        version=version,
        patient_id=_text(raw["patient_id"]),
        recording_id=_text(raw["recording_id"]),
        start_datetime=start,
        header_bytes=header_bytes,
        n_records=n_records,
        record_duration=duration,
        signals=tuple(signals),
        reserved=_text(raw["reserved"]),
    )


def _format_number(value, width: int) -> str:
    if isinstance(value, (int, np.integer)) or float(value).is_integer():
        text = str(int(value))
    else:
        text = repr(float(value))
        precision = width
        while len(text) > width and precision > 1:
            precision -= 1
            text = f"{float(value):.{precision}g}"
    if len(text) > width:
        raise InvalidHeaderError(f"value {value!r} does not fit in {width} characters")
    return text


def _pad(text: str, width: int) -> bytes:
    encoded = text.encode("ascii", errors="replace")
    if len(encoded) > width:
        raise InvalidHeaderError(f"field {text!r} longer than {width} characters")
    return encoded.ljust(width, b" ")


def serialize_edf_header(header: EdfHeader) -> bytes:
    start = header.start_datetime
    values = {
        "version": str(header.version),
        "patient_id": header.patient_id,
        "recording_id": header.recording_id,
        "start_date": f"{start.day:02d}.{start.month:02d}.{start.year % 100:02d}",
        "start_time": f"{start.hour:02d}.{start.minute:02d}.{start.second:02d}",
        "header_bytes": str(256 * (header.n_signals + 1)),
        "reserved": header.reserved,
        "n_records": str(header.n_records),
        "record_duration": _format_number(header.record_duration, 8),
        "n_signals": str(header.n_signals),
    }
    out = bytearray()
    for name, width in _GLOBAL_FIELDS:
        out += _pad(values[name], width)
    for name, width in _SIGNAL_FIELDS:
        for sig in header.signals:
            value = getattr(sig, name)
            if not isinstance(value, str):
                value = _format_number(value, width)
            out += _pad(value, width)
    return bytes(out)


def calibrate(digital: np.ndarray, sig: SignalHeader) -> np.ndarray:
    """Map stored integers to physical units with the signal's linear calibration."""
    span = sig.digital_max - sig.digital_min
    if span == 0:
        raise DegenerateCalibrationError(f"signal {sig.label!r} has digital_min == digital_max")
    d = np.asarray(digital, dtype=np.float64)
    return (d - sig.digital_min) * (sig.physical_max - sig.physical_min) / span + sig.physical_min


def _split_records(header: EdfHeader, payload: bytes) -> list[np.ndarray]:
    need = header.payload_bytes
    if len(payload) < need:
        raise TruncatedRecordsError(
            f"data records need {need} bytes ({header.n_records} records), got {len(payload)}"
        )
    ints = np.frombuffer(payload[:need], dtype="<i2").reshape(header.n_records, header.record_samples)
    parts = []
    start = 0
    for sig in header.signals:
        parts.append(ints[:, start : start + sig.samples_per_record])
        start += sig.samples_per_record
    return parts


def read_signals(header: EdfHeader, payload: bytes) -> EEGRecording:
    """Decode the data records that follow the header.

    ``payload`` is the byte sequence after the header.  Annotation channels
    are left out of the returned matrix.
    """
    parts = _split_records(header, payload)
    labels, rows, rates = [], [], set()
    for sig, block in zip(header.signals, parts):
        if sig.is_annotation:
            continue
        labels.append(sig.label)
        rows.append(calibrate(block.reshape(-1), sig))
        rates.add(sig.samples_per_record / header.record_duration)
    if len(rates) > 1:
        raise InvalidHeaderError(f"signals have different sample rates: {sorted(rates)}")
    rate = rates.pop() if rates else 0.0
    samples = np.vstack(rows) if rows else np.zeros((0, 0))
    return EEGRecording(labels, rate, samples)


def annotation_bytes(header: EdfHeader, payload: bytes) -> bytes:
    """Concatenate the raw bytes of every annotation channel, record by record."""
    parts = _split_records(header, payload)
    chunks = []
    for r in range(header.n_records):
        for sig, block in zip(header.signals, parts):
            if sig.is_annotation:
                chunks.append(block[r].astype("<i2").tobytes())
    return b"".join(chunks)


_ONSET = re.compile(rb"[+-]\d+(\.\d*)?\Z")
_DURATION = re.compile(rb"\d+(\.\d*)?\Z")


def parse_annotations(data: bytes) -> list[Event]:
    """Parse an EDF+ TAL stream into events.

    NUL bytes between TALs are padding.  Every non-empty annotation text in a
    TAL becomes one :class:`Event` sharing that TAL's onset and duration.
    """
    events = []
    pos = 0
    n = len(data)
    while pos < n:
        if data[pos] == 0:
            pos += 1
            continue
        end = data.find(b"\x00", pos)
        if end < 0:
            raise MalformedTalError(f"TAL starting at byte {pos} has no terminating NUL")
        tal = data[pos:end]
        pos = end + 1
        if not tal.endswith(b"\x14"):
            raise MalformedTalError(f"TAL {tal!r} does not end with the 0x14 separator")
        head, *texts = tal[:-1].split(b"\x14")
        if b"\x15" in head:
            onset_raw, duration_raw = head.split(b"\x15", 1)
            if not _DURATION.match(duration_raw):
                raise MalformedTalError(f"bad duration {duration_raw!r}")
            duration = float(duration_raw)
        else:
            onset_raw, duration = head, 0.0
        if not _ONSET.match(onset_raw):
            raise MalformedTalError(f"bad onset {onset_raw!r}")
        onset = float(onset_raw)
        if onset_raw.startswith(b"-"):
            raise NegativeOnsetError(f"negative onset {onset_raw.decode()}")
        for text in texts:
            if text:
                events.append(Event(onset, duration, text.decode("ascii", errors="replace")))
    return events


def encode_annotations(events, timekeeping_onset: float | None = None) -> bytes:
    """Encode events as a TAL stream (inverse of :func:`parse_annotations`)."""
    out = bytearray()
    if timekeeping_onset is not None:
        out += b"+" + _format_seconds(timekeeping_onset) + b"\x14\x14\x00"
    for ev in events:
        out += b"+" + _format_seconds(ev.onset_s)
        if ev.duration_s:
            out += b"\x15" + _format_seconds(ev.duration_s)
        out += b"\x14" + ev.label.encode("ascii") + b"\x14\x00"
    return bytes(out)


def _format_seconds(value: float) -> bytes:
    return (str(int(value)) if float(value).is_integer() else repr(float(value))).encode()


def read_edf(path) -> EdfFile:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    header = parse_edf_header(data)
    payload = data[header.header_bytes :]
    recording = read_signals(header, payload)
    events = []
    if any(s.is_annotation for s in header.signals):
        events = parse_annotations(annotation_bytes(header, payload))
    return EdfFile(header, recording, events)


def write_edf(
    path,
    labels,
    digital: np.ndarray,
    sample_rate: int,
    *,
    physical_range=(-1000.0, 1000.0),
    digital_range=(-32768, 32767),
    record_duration: float = 1.0,
    events=(),
    start=datetime.datetime(2009, 8, 12, 16, 15, 0),
    patient_id: str = "X X X X",
    recording_id: str = "Startdate X X X X",
    annotation_samples: int = 60,
) -> EdfHeader:
    """Write int16 samples (channels x time) as an EDF+ file.

    The sample count must be a whole number of records.  When ``events`` are
    given an "EDF Annotations" channel is appended; each record starts with a
    timekeeping TAL followed by the TALs of events whose onset falls in it.
    """
    digital = np.asarray(digital)
    spr = int(round(sample_rate * record_duration))
    n_ch, n_samp = digital.shape
    if n_samp % spr:
        raise InvalidHeaderError(f"{n_samp} samples is not a whole number of {spr}-sample records")
    n_records = n_samp // spr
    pmin, pmax = physical_range
    dmin, dmax = digital_range
    signals = [
        SignalHeader(
            label=lab,
            physical_min=pmin,
            physical_max=pmax,
            digital_min=dmin,
            digital_max=dmax,
            samples_per_record=spr,
            physical_dimension="uV",
        )
        for lab in labels
    ]
    tal_records = []
    events = list(events)
    if events:
        signals.append(
            SignalHeader(
                label=ANNOTATION_LABEL,
                physical_min=-1,
                physical_max=1,
                digital_min=-32768,
                digital_max=32767,
                samples_per_record=annotation_samples,
            )
        )
        width = 2 * annotation_samples
        for r in range(n_records):
            here = [e for e in events if int(e.onset_s // record_duration) == r]
            chunk = encode_annotations(here, timekeeping_onset=r * record_duration)
            if len(chunk) > width:
                raise InvalidHeaderError(f"annotations need {len(chunk)} bytes, channel holds {width}")
            tal_records.append(chunk.ljust(width, b"\x00"))
    header = EdfHeader(
        version=0,
        patient_id=patient_id,
        recording_id=recording_id,
        start_datetime=start,
        header_bytes=256 * (len(signals) + 1),
        n_records=n_records,
        record_duration=record_duration,
        signals=tuple(signals),
        reserved="EDF+C" if events else "",
    )
    body = bytearray()
    blocks = digital.astype("<i2").reshape(n_ch, n_records, spr)
    for r in range(n_records):
        body += blocks[:, r, :].tobytes()
        if events:
            body += tal_records[r]
    try:
        Path(path).write_bytes(serialize_edf_header(header) + bytes(body))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return header
