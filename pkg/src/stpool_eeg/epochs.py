"""Cutting labelled motor-imagery epochs out of PhysioNet EEGMMIDB runs."""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .edf import EEGRecording, Event
from .errors import InputError, UnknownRunTypeError, WindowOutOfBoundsError

SCHEMES = {
    "LR": ("L", "R"),
    "LRO": ("L", "R", "O"),
    "LROF": ("L", "R", "O", "F"),
}

BASELINE_OPEN_RUNS = frozenset({1})
BASELINE_CLOSED_RUNS = frozenset({2})
FIST_IMAGERY_RUNS = frozenset({4, 8, 12})
FEET_IMAGERY_RUNS = frozenset({6, 10, 14})
EXECUTION_RUNS = frozenset({3, 5, 7, 9, 11, 13})


@dataclass
class Epoch:
    signals: np.ndarray  # (channels, window_samples)
    label: int
    subject_id: int

    def __post_init__(self):
        self.signals = np.asarray(self.signals, dtype=np.float64)


def scheme_classes(scheme: str) -> tuple[str, ...]:
    key = scheme.replace("/", "").upper()
    if key not in SCHEMES:
        raise InputError(f"unknown task scheme {scheme!r}; expected one of L/R, L/R/O, L/R/O/F")
    return SCHEMES[key]


def parse_physionet_name(name: str) -> tuple[int, int]:
    """Return (subject, run) from a file name such as ``S001R04.edf``."""
    m = re.search(r"S(\d{3})R(\d{2})", name)
    if not m:
        raise InputError(f"{name!r} does not follow the SxxxRyy naming convention")
    return int(m.group(1)), int(m.group(2))


def run_cues(run: int) -> dict[str, str]:
    """Annotation code -> class letter for one run number."""
    if run in FIST_IMAGERY_RUNS:
        return {"T1": "L", "T2": "R"}
    if run in FEET_IMAGERY_RUNS:
        # T1 in these runs is imagery of both fists, which has no class here
        return {"T2": "F"}
    if run in BASELINE_OPEN_RUNS | BASELINE_CLOSED_RUNS | EXECUTION_RUNS:
        return {}
    raise UnknownRunTypeError(f"run {run} is not part of the 14-run EEGMMIDB protocol")


def extract_epochs(
    rec: EEGRecording,
    events: list[Event],
    scheme: str,
    window_s: float,
    *,
    run: int,
    subject_id: int,
) -> list[Epoch]:
    classes = scheme_classes(scheme)
    window = int(round(window_s * rec.sample_rate_hz))
    n = rec.n_samples
    epochs = []

    if run in BASELINE_OPEN_RUNS:
        if "O" in classes:
            label = classes.index("O")
            for start in range(0, n - window + 1, window):
                epochs.append(Epoch(rec.samples[:, start : start + window].copy(), label, subject_id))
        return epochs

    cues = run_cues(run)
    for ev in events:
        letter = cues.get(ev.label)
        if letter is None or letter not in classes:
            continue
        start = int(round(ev.onset_s * rec.sample_rate_hz))
        if start + window > n:
            raise WindowOutOfBoundsError(
                f"{window_s} s window at onset {ev.onset_s} s runs past the end of the "
                f"{rec.duration_s:.3f} s recording"
            )
        epochs.append(Epoch(rec.samples[:, start : start + window].copy(), classes.index(letter), subject_id))
    return epochs
