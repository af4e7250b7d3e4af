from __future__ import annotations

import io
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .edf import EEGRecording
from .errors import (
    BadArityError,
    ChannelMismatchError,
    DuplicateLabelError,
    InvalidMontageError,
    NonFiniteCoordinateError,
)

SHIPPED_MONTAGE = "montage_1010_64.csv"


@dataclass(frozen=True)
class ElectrodeMontage:
    """Labelled 3D electrode positions on a unit-radius head sphere.

    Axes: x towards the right ear, y towards the nose, z towards the vertex.
    """

    labels: tuple[str, ...]
    coords3d: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords3d, dtype=np.float64)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "coords3d", coords)
        if coords.ndim != 2 or coords.shape != (len(self.labels), 3):
            raise InvalidMontageError(f"coords3d shape {coords.shape} does not match {len(self.labels)} labels")
        seen = set()
        for lab in self.labels:
            if lab in seen:
                raise DuplicateLabelError(f"electrode label {lab!r} appears twice")
            seen.add(lab)
        if not np.all(np.isfinite(coords)):
            raise NonFiniteCoordinateError("montage contains non-finite coordinates")
        norms = np.linalg.norm(coords, axis=1)
        bad = np.flatnonzero((norms < 0.5) | (norms > 1.5))
        if bad.size:
            raise InvalidMontageError(
                f"electrode {self.labels[bad[0]]!r} has radius {norms[bad[0]]:.3f}, outside [0.5, 1.5]"
            )

    def __len__(self):
        return len(self.labels)

    def subset(self, labels) -> "ElectrodeMontage":
        index = {lab: i for i, lab in enumerate(self.labels)}
        rows = [index[lab] for lab in labels]
        return ElectrodeMontage(tuple(labels), self.coords3d[rows])


def load_montage(text) -> ElectrodeMontage:
    """Parse ``label,x,y,z`` lines following a single header line."""
    if isinstance(text, str):
        text = io.StringIO(text)
    lines = [ln.strip() for ln in text]
    labels, rows = [], []
    seen = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 4:
            raise BadArityError(f"line {lineno}: expected 4 comma-separated fields, got {len(parts)}")
        label = parts[0]
        if label in seen:
            raise DuplicateLabelError(f"line {lineno}: electrode label {label!r} appears twice")
        seen.add(label)
        try:
            xyz = [float(p) for p in parts[1:]]
        except ValueError:
            raise NonFiniteCoordinateError(f"line {lineno}: unparseable coordinate in {line!r}") from None
        if not all(math.isfinite(v) for v in xyz):
            raise NonFiniteCoordinateError(f"line {lineno}: non-finite coordinate in {line!r}")
        labels.append(label)
        rows.append(xyz)
    return ElectrodeMontage(tuple(labels), np.array(rows, dtype=np.float64).reshape(-1, 3))


def shipped_montage() -> ElectrodeMontage:
    """The 64-channel 10-10 layout used by the PhysioNet motor imagery recordings."""
    text = resources.files("stpool_eeg").joinpath("data").joinpath(SHIPPED_MONTAGE).read_text()
    return load_montage(text)


def normalize_label(label: str) -> str:
    # PhysioNet pads labels with dots, e.g. "Fc5." or "Cz.."
    return label.strip().rstrip(".").upper()


def align_to_montage(rec: EEGRecording, montage: ElectrodeMontage) -> EEGRecording:
    """Reorder recording channels to montage order, dropping channels not in the montage."""
    index = {normalize_label(lab): i for i, lab in enumerate(rec.channel_labels)}
    rows = []
    for lab in montage.labels:
        key = normalize_label(lab)
        if key not in index:
            raise ChannelMismatchError(f"recording has no channel for electrode {lab!r}")
        rows.append(index[key])
    return EEGRecording(list(montage.labels), rec.sample_rate_hz, rec.samples[rows])
