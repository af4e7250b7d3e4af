"""Synthetic motor-imagery-like data for smoke tests and demos.

Each class activates one group of electrodes with a fixed-phase oscillation
whose amplitude is ``separation`` times the white-noise sigma; electrodes
outside the group carry noise only.  Subjects differ by a random gain.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .edf import Event, write_edf
from .epochs import Epoch
from .harness import EXCLUDED_SUBJECTS
from .montage import ElectrodeMontage, shipped_montage


def half_montage() -> ElectrodeMontage:
    """Every second electrode of the shipped 64-channel layout (32 electrodes)."""
    m = shipped_montage()
    return m.subset(m.labels[::2])


def class_groups(montage: ElectrodeMontage, num_classes: int = 2) -> list[np.ndarray]:
    """Boolean electrode masks: left hemisphere, right hemisphere, frontal, posterior."""
    x, y = montage.coords3d[:, 0], montage.coords3d[:, 1]
    groups = [x < -0.15, x > 0.15, y > 0.4, y < -0.5]
    if num_classes > len(groups):
        raise ValueError(f"at most {len(groups)} synthetic classes")
    return groups[:num_classes]


def subject_ids(n: int, start: int = 1) -> list[int]:
    """First ``n`` ids from ``start`` upward, skipping the excluded PhysioNet subjects."""
    out, s = [], start
    while len(out) < n:
        if s not in EXCLUDED_SUBJECTS:
            out.append(s)
        s += 1
    return out


def make_epochs(
    montage: ElectrodeMontage,
    *,
    n_subjects: int = 40,
    epochs_per_subject: int = 10,
    num_classes: int = 2,
    sample_rate: float = 160.0,
    window_s: float = 1.0,
    separation: float = 5.0,
    noise_sigma: float = 1.0,
    freq_hz: float = 2.0,
    seed: int = 0,
) -> dict[int, list[Epoch]]:
    rng = np.random.default_rng(seed)
    groups = class_groups(montage, num_classes)
    n_samp = int(round(window_s * sample_rate))
    wave = np.sin(2 * np.pi * freq_hz * np.arange(n_samp) / sample_rate)
    data = {}
    for sid in subject_ids(n_subjects):
        gain = rng.uniform(0.8, 1.2)
        epochs = []
        for e in range(epochs_per_subject):
            label = e % num_classes
            signals = noise_sigma * rng.standard_normal((len(montage), n_samp))
            signals[groups[label]] += gain * separation * noise_sigma * wave
            epochs.append(Epoch(signals, label, sid))
        data[sid] = epochs
    return data


def write_physionet_like(
    directory,
    subjects=(1, 2),
    runs=(1, 4, 6),
    *,
    sample_rate: int = 160,
    duration_s: int = 60,
    separation: float = 5.0,
    noise_uv: float = 10.0,
    seed: int = 0,
) -> list[Path]:
    """Write EDF+ files named SxxxRyy.edf mimicking the EEGMMIDB layout.

    Channel labels use the PhysioNet dotted style ("Fc5.").  Cue runs get a
    T0/T1/T2 cue every 8 s; the cued class pattern lasts 6 s.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    montage = shipped_montage()
    left, right, front, _ = class_groups(montage, 4)
    labels = [(lab[0] + lab[1:].lower()).ljust(4, ".") for lab in montage.labels]
    rng = np.random.default_rng(seed)
    n = sample_rate * duration_s
    t = np.arange(n) / sample_rate
    wave = np.sin(2 * np.pi * 2.0 * t)
    paths = []
    for sid in subjects:
        for run in runs:
            signals = noise_uv * rng.standard_normal((len(montage), n))
            events = []
            if run == 1:
                signals[front] += separation * noise_uv * wave
            else:
                codes = ["T1", "T2"]
                onset = 0.0
                k = 0
                while onset + 8 <= duration_s:
                    events.append(Event(onset, 2.0, "T0"))
                    cue = onset + 2.0
                    code = codes[k % 2]
                    events.append(Event(cue, 6.0, code))
                    if run in (6, 10, 14):
                        mask = front if code == "T2" else left | right
                    else:
                        mask = left if code == "T1" else right
                    sl = slice(int(cue * sample_rate), int((cue + 6) * sample_rate))
                    signals[np.ix_(mask, np.arange(n)[sl])] += separation * noise_uv * wave[sl]
                    onset += 8.0
                    k += 1
            digital = np.clip(np.round(signals / (2000.0 / 65535.0) - 0.5), -32768, 32767).astype(np.int16)
            path = directory / f"S{sid:03d}R{run:02d}.edf"
            write_edf(path, labels, digital, sample_rate, events=events)
            paths.append(path)
    return paths
