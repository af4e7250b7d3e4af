"""Temporal quantization and nearest-electrode rasterization of EEG epochs."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .coords import CoordinateMap2D
from .epochs import Epoch
from .errors import (
    ArityMismatchError,
    BadMagicError,
    DegenerateAxisError,
    InputError,
    IoFailure,
    NotDivisibleError,
    PixelCollisionError,
    VersionMismatchError,
)

TOPO_MAGIC = b"TOPO"
TOPO_VERSION = 1
_TOPO_HEAD = struct.Struct("<4sHIII")
_TOPO_TAIL = struct.Struct("<HH")


@dataclass(frozen=True)
class PixelAssignment:
    grid_h: int
    grid_w: int
    owner: np.ndarray  # (H, W) electrode index per pixel
    electrode_pixels: np.ndarray  # (n, 2) integer (row, col)

    @property
    def n_electrodes(self) -> int:
        return self.electrode_pixels.shape[0]


@dataclass
class TopomapSequence:
    frames: np.ndarray  # (N, H, W)
    label: int
    subject_id: int

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 3 or self.frames.shape[0] < 1:
            raise InputError(f"frames must be (N>=1, H, W), got {self.frames.shape}")


def quantize_time(signals: np.ndarray, n_frames: int) -> np.ndarray:
    """Average non-overlapping windows of ``window_samples / n_frames`` samples per channel."""
    signals = signals.signals if isinstance(signals, Epoch) else np.asarray(signals, dtype=np.float64)
    n_ch, n_samp = signals.shape
    if n_frames < 1 or n_samp % n_frames:
        raise NotDivisibleError(f"{n_samp} samples cannot be split into {n_frames} equal frames")
    return signals.reshape(n_ch, n_frames, n_samp // n_frames).mean(axis=2)


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5).astype(np.int64)


def scale_to_grid(c: CoordinateMap2D, h: int, w: int) -> np.ndarray:
    """Min-max scale u onto columns [0, w-1] and v onto rows [0, h-1] independently.

    Returns an (n, 2) integer array of (row, col) pixels.
    """
    if h < 2 or w < 2:
        raise InputError(f"grid must be at least 2x2, got {h}x{w}")
    pixels = np.empty((len(c.labels), 2), dtype=np.int64)
    for axis, size, out in ((0, w, 1), (1, h, 0)):
        vals = c.coords2d[:, axis]
        lo, hi = vals.min(), vals.max()
        if hi == lo:
            raise DegenerateAxisError(f"all electrodes share coordinate {float(lo)!r} on axis {'uv'[axis]}")
        pixels[:, out] = _round_half_up((vals - lo) / (hi - lo) * (size - 1))
    seen = {}
    for i, (r, col) in enumerate(map(tuple, pixels)):
        if (r, col) in seen:
            raise PixelCollisionError(seen[(r, col)], i, (int(r), int(col)))
        seen[(r, col)] = i
    return pixels


def build_assignment(pixels: np.ndarray, h: int, w: int) -> PixelAssignment:
    """Give every pixel to the electrode nearest to it (ties -> lowest index)."""
    pixels = np.asarray(pixels, dtype=np.int64).reshape(-1, 2)
    rows, cols = np.mgrid[0:h, 0:w]
    # integer squared distances so ties are exact; argmin keeps the first minimum
    d = (rows[..., None] - pixels[:, 0]) ** 2 + (cols[..., None] - pixels[:, 1]) ** 2
    owner = np.argmin(d, axis=2)
    return PixelAssignment(h, w, owner, pixels)


def assignment_for(c: CoordinateMap2D, h: int = 32, w: int = 32) -> PixelAssignment:
    return build_assignment(scale_to_grid(c, h, w), h, w)


def rasterize(values: np.ndarray, a: PixelAssignment) -> np.ndarray:
    """Fill each pixel with its owning electrode's value.

    ``values`` may be (n,) for one frame or (n, N) for N frames, giving (N, H, W).
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] != a.n_electrodes:
        raise ArityMismatchError(f"{values.shape[0]} values for {a.n_electrodes} electrodes")
    if values.ndim == 1:
        return values[a.owner]
    return np.moveaxis(values[a.owner], -1, 0)


def zscore_channels(signals: np.ndarray) -> np.ndarray:
    out = np.zeros_like(signals, dtype=np.float64)
    flat = np.ptp(signals, axis=1) == 0
    live = ~flat
    x = signals[live]
    out[live] = (x - x.mean(axis=1, keepdims=True)) / x.std(axis=1, keepdims=True)
    return out


def build_sequence(e: Epoch, a: PixelAssignment, n_frames: int, norm: str = "zscore") -> TopomapSequence:
    if e.signals.shape[0] != a.n_electrodes:
        raise ArityMismatchError(f"epoch has {e.signals.shape[0]} channels, assignment {a.n_electrodes}")
    if norm == "zscore":
        signals = zscore_channels(e.signals)
    elif norm == "none":
        signals = e.signals
    else:
        raise InputError(f"unknown normalization {norm!r}")
    return TopomapSequence(rasterize(quantize_time(signals, n_frames), a), e.label, e.subject_id)


def frame_to_gray(frame: np.ndarray) -> np.ndarray:
    lo, hi = float(frame.min()), float(frame.max())
    if hi == lo:
        return np.full(frame.shape, 128, dtype=np.uint8)
    return _round_half_up((frame - lo) / (hi - lo) * 255.0).astype(np.uint8)


def export_image(frame: np.ndarray, path) -> None:
    """Write one frame as a binary PGM, min->0 and max->255."""
    gray = frame_to_gray(np.asarray(frame, dtype=np.float64))
    h, w = gray.shape
    try:
        Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode() + gray.tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def encode_sequence(seq: TopomapSequence) -> bytes:
    n, h, w = seq.frames.shape
    return (
        _TOPO_HEAD.pack(TOPO_MAGIC, TOPO_VERSION, n, h, w)
        + seq.frames.astype("<f4").tobytes()
        + _TOPO_TAIL.pack(seq.label, seq.subject_id)
    )


def decode_sequences(data: bytes) -> list[TopomapSequence]:
    """Decode one or more back-to-back TOPO records."""
    out = []
    pos = 0
    while pos < len(data):
        if len(data) - pos < _TOPO_HEAD.size:
            raise BadMagicError(f"truncated TOPO header at byte {pos}")
        magic, version, n, h, w = _TOPO_HEAD.unpack_from(data, pos)
        if magic != TOPO_MAGIC:
            raise BadMagicError(f"bad magic {magic!r} at byte {pos}")
        if version != TOPO_VERSION:
            raise VersionMismatchError(f"TOPO version {version}, expected {TOPO_VERSION}")
        pos += _TOPO_HEAD.size
        size = n * h * w * 4
        if len(data) - pos < size + _TOPO_TAIL.size:
            raise BadMagicError(f"truncated TOPO payload at byte {pos}")
        frames = np.frombuffer(data, dtype="<f4", count=n * h * w, offset=pos).reshape(n, h, w)
        pos += size
        label, subject = _TOPO_TAIL.unpack_from(data, pos)
        pos += _TOPO_TAIL.size
        out.append(TopomapSequence(frames.astype(np.float64), label, subject))
    return out


def write_sequences(path, seqs) -> None:
    try:
        Path(path).write_bytes(b"".join(encode_sequence(s) for s in seqs))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_sequences(path) -> list[TopomapSequence]:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return decode_sequences(data)
