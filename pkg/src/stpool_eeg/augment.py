"""Training-time augmentation: raw-signal noise, MixUp and CutMix with soft labels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .epochs import Epoch
from .errors import InputError, RectOutOfBoundsError, ShapeMismatchError


@dataclass
class Sample:
    frames: np.ndarray  # (N, H, W)
    label: np.ndarray  # (num_classes,) weights summing to 1


def one_hot(label: int, num_classes: int) -> np.ndarray:
    out = np.zeros(num_classes)
    out[label] = 1.0
    return out


def gaussian_noise(e: Epoch, scale: float, seed) -> Epoch:
    if scale < 0:
        raise InputError("noise scale must be non-negative")
    if scale == 0:
        return Epoch(e.signals.copy(), e.label, e.subject_id)
    rng = np.random.default_rng(seed)
    return Epoch(e.signals + scale * rng.standard_normal(e.signals.shape), e.label, e.subject_id)


def _check_pair(a: Sample, b: Sample) -> None:
    if a.frames.shape != b.frames.shape or a.label.shape != b.label.shape:
        raise ShapeMismatchError(f"cannot mix {a.frames.shape} with {b.frames.shape}")


def mixup(a: Sample, b: Sample, lam: float) -> Sample:
    if not 0.0 <= lam <= 1.0:
        raise InputError(f"mixing weight {lam} outside [0, 1]")
    _check_pair(a, b)
    # Snap lam so that 1 - lam is exact; then mixup(a, b, lam) and
    # mixup(b, a, 1 - lam) use bit-identical weights.
    wa = 1.0 - (1.0 - lam)
    wb = 1.0 - wa
    return Sample(wa * a.frames + wb * b.frames, wa * a.label + wb * b.label)


def cutmix(a: Sample, b: Sample, rect) -> Sample:
    """Paste b's pixels inside ``rect = (row0, col0, row1, col1)`` (half-open) into every frame of a."""
    _check_pair(a, b)
    r0, c0, r1, c1 = rect
    _, h, w = a.frames.shape
    if not (0 <= r0 <= r1 <= h and 0 <= c0 <= c1 <= w):
        raise RectOutOfBoundsError(f"rectangle {rect} outside the {h}x{w} grid")
    frames = a.frames.copy()
    frames[:, r0:r1, c0:c1] = b.frames[:, r0:r1, c0:c1]
    wb = (r1 - r0) * (c1 - c0) / (h * w)
    return Sample(frames, (1.0 - wb) * a.label + wb * b.label)


def random_rect(lam: float, h: int, w: int, rng: np.random.Generator):
    """CutMix box with side ratios sqrt(1 - lam), centred uniformly and clipped to the grid."""
    ratio = np.sqrt(1.0 - lam)
    ch, cw = int(h * ratio), int(w * ratio)
    cy, cx = int(rng.integers(h)), int(rng.integers(w))
    r0, r1 = np.clip([cy - ch // 2, cy + ch // 2], 0, h)
    c0, c1 = np.clip([cx - cw // 2, cx + cw // 2], 0, w)
    return int(r0), int(c0), int(r1), int(c1)


@dataclass(frozen=True)
class MixConfig:
    mixup_alpha: float = 0.8
    cutmix_alpha: float = 1.0
    switch_prob: float = 0.5


def mix_batch(frames: np.ndarray, labels: np.ndarray, rng: np.random.Generator, cfg: MixConfig = MixConfig()):
    """Mix a batch with a shuffled copy of itself.

    One of MixUp or CutMix is chosen per batch (CutMix with probability
    ``switch_prob``) and one lambda is drawn for the whole batch.
    """
    partner = rng.permutation(len(frames))
    use_cutmix = rng.random() < cfg.switch_prob
    out_f = np.empty_like(frames)
    out_l = np.empty_like(labels)
    if use_cutmix:
        lam = rng.beta(cfg.cutmix_alpha, cfg.cutmix_alpha)
        rect = random_rect(lam, frames.shape[2], frames.shape[3], rng)
        for i, j in enumerate(partner):
            s = cutmix(Sample(frames[i], labels[i]), Sample(frames[j], labels[j]), rect)
            out_f[i], out_l[i] = s.frames, s.label
    else:
        lam = rng.beta(cfg.mixup_alpha, cfg.mixup_alpha)
        for i, j in enumerate(partner):
            s = mixup(Sample(frames[i], labels[i]), Sample(frames[j], labels[j]), lam)
            out_f[i], out_l[i] = s.frames, s.label
    return out_f, out_l
