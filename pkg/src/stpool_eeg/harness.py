"""Cross-individual training and evaluation.

Subjects are split into five blocks; each fold tests on one block and
splits the rest into training and validation subjects.  The checkpoint with
the best validation accuracy is kept.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .augment import MixConfig, gaussian_noise, mix_batch
from .coords import METHODS, TsneParams, transform
from .errors import (
    DivergedLossError,
    EmptySetError,
    InputError,
    IoFailure,
    MissingCacheError,
    TooFewSubjectsError,
)
from .model import AdamState, ModelConfig, StPoolModel, adam_step, forward, loss_and_grad, save_checkpoint
from .topomap import TopomapSequence, assignment_for, build_sequence, read_sequences

EXCLUDED_SUBJECTS = frozenset({38, 88, 89, 92, 100, 104})
N_FOLDS = 5
ABLATION_AXES = ("transform", "mixer", "n_frames")


@dataclass(frozen=True)
class FoldPlan:
    fold_id: int
    test_subjects: tuple[int, ...]
    train_subjects: tuple[int, ...]
    val_subjects: tuple[int, ...]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 8
    lr: float = 1e-4
    seed: int = 0
    augment: bool = True
    noise_scale: float = 1e-4
    mixup_alpha: float = 0.8
    cutmix_alpha: float = 1.0
    switch_prob: float = 0.5


@dataclass
class Metrics:
    accuracy: float
    confusion: np.ndarray
    per_class_recall: np.ndarray
    loss_curve: list = field(default_factory=list)
    val_curve: list = field(default_factory=list)
    best_epoch: int = -1

    @classmethod
    def empty(cls, num_classes: int) -> "Metrics":
        return cls(math.nan, np.zeros((num_classes, num_classes), dtype=np.int64), np.full(num_classes, math.nan))


def split_subjects(subjects, seed: int, train_fraction: float = 0.875) -> list[FoldPlan]:
    ids = sorted({int(s) for s in subjects} - EXCLUDED_SUBJECTS)
    if len(ids) < N_FOLDS:
        raise TooFewSubjectsError(f"need at least {N_FOLDS} subjects after exclusions, got {len(ids)}")
    rng = np.random.default_rng(seed)
    order = [ids[i] for i in rng.permutation(len(ids))]
    blocks = [list(b) for b in np.array_split(np.array(order), N_FOLDS)]
    plans = []
    for k in range(N_FOLDS):
        rest = [s for j, b in enumerate(blocks) if j != k for s in b]
        rest = [rest[i] for i in rng.permutation(len(rest))]
        n_train = math.floor(train_fraction * len(rest))
        plans.append(
            FoldPlan(
                fold_id=k,
                test_subjects=tuple(sorted(int(s) for s in blocks[k])),
                train_subjects=tuple(sorted(int(s) for s in rest[:n_train])),
                val_subjects=tuple(sorted(int(s) for s in rest[n_train:])),
            )
        )
    return plans


# ---------------------------------------------------------------- data sources


class CacheSource:
    """Sequences read from ``<directory>/S{subject:03d}.topo`` files."""

    supports_noise = False

    def __init__(self, directory):
        self.directory = Path(directory)
        self._loaded: dict[int, list[TopomapSequence]] = {}

    def path(self, subject: int) -> Path:
        return self.directory / f"S{subject:03d}.topo"

    def subjects(self) -> list[int]:
        return sorted(int(p.stem[1:]) for p in self.directory.glob("S*.topo"))

    def sequences(self, subjects, rng=None, noise_scale=0.0) -> list[TopomapSequence]:
        out = []
        for s in subjects:
            if s not in self._loaded:
                p = self.path(s)
                if not p.exists():
                    raise MissingCacheError(f"no cached sequences for subject {s} at {p}")
                self._loaded[s] = read_sequences(p)
            out.extend(self._loaded[s])
        return out


class EpochSource:
    """Sequences rendered on demand from raw epochs, so raw-signal noise can be applied."""

    supports_noise = True

    def __init__(self, epochs: dict[int, list], assignment, n_frames: int, norm: str = "zscore"):
        self.epochs = epochs
        self.assignment = assignment
        self.n_frames = n_frames
        self.norm = norm
        self._clean: dict[int, list[TopomapSequence]] = {}

    def subjects(self) -> list[int]:
        return sorted(self.epochs)

    def sequences(self, subjects, rng=None, noise_scale=0.0) -> list[TopomapSequence]:
        out = []
        for s in subjects:
            if s not in self.epochs:
                raise MissingCacheError(f"no epochs for subject {s}")
            if noise_scale > 0 and rng is not None:
                for e in self.epochs[s]:
                    noisy = gaussian_noise(e, noise_scale, int(rng.integers(2**63)))
                    out.append(build_sequence(noisy, self.assignment, self.n_frames, self.norm))
                continue
            if s not in self._clean:
                self._clean[s] = [build_sequence(e, self.assignment, self.n_frames, self.norm) for e in self.epochs[s]]
            out.extend(self._clean[s])
        return out


def _stack(seqs, num_classes):
    frames = np.stack([s.frames for s in seqs])
    labels = np.zeros((len(seqs), num_classes))
    labels[np.arange(len(seqs)), [s.label for s in seqs]] = 1.0
    return frames, labels


# ---------------------------------------------------------------- evaluation


def predict(model: StPoolModel, seqs, batch_size: int = 64) -> np.ndarray:
    frames = np.stack([s.frames for s in seqs])
    probs = [forward(model, frames[i : i + batch_size]) for i in range(0, len(frames), batch_size)]
    # argmax returns the first maximum, i.e. ties go to the lowest class index
    return np.argmax(np.concatenate(probs), axis=1)


def metrics_from_predictions(truth, pred, num_classes: int) -> Metrics:
    truth = np.asarray(truth, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if truth.size == 0:
        raise EmptySetError("cannot evaluate an empty sample set")
    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(confusion, (truth, pred), 1)
    rows = confusion.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        recall = np.where(rows > 0, np.diag(confusion) / np.maximum(rows, 1), math.nan)
    return Metrics(float(np.trace(confusion) / confusion.sum()), confusion, recall)


def evaluate(model: StPoolModel, seqs) -> Metrics:
    seqs = list(seqs)
    if not seqs:
        raise EmptySetError("cannot evaluate an empty sample set")
    return metrics_from_predictions([s.label for s in seqs], predict(model, seqs), model.cfg.num_classes)


# ---------------------------------------------------------------- training


def train_fold(plan: FoldPlan, source, model_cfg: ModelConfig, train_cfg: TrainConfig, out_dir=None):
    """Train on the plan's training subjects; return (best model, validation metrics).

    Randomness for epoch ``e`` comes from ``default_rng([seed, e])`` so runs
    are reproducible and independent of how many epochs precede them.
    """
    model = StPoolModel(model_cfg)
    best = model.copy()
    if train_cfg.epochs <= 0:
        return best, Metrics.empty(model_cfg.num_classes)

    train_seqs = source.sequences(plan.train_subjects)
    val_seqs = source.sequences(plan.val_subjects)
    if not train_seqs:
        raise EmptySetError(f"fold {plan.fold_id} has no training sequences")
    if not val_seqs:
        raise EmptySetError(f"fold {plan.fold_id} has no validation sequences")
    clean_frames, clean_labels = _stack(train_seqs, model_cfg.num_classes)
    noisy = train_cfg.augment and train_cfg.noise_scale > 0 and source.supports_noise
    mix_cfg = MixConfig(train_cfg.mixup_alpha, train_cfg.cutmix_alpha, train_cfg.switch_prob)

    state = AdamState.zeros_like(model.params)
    metrics = None
    loss_curve, val_curve = [], []
    best_acc = -math.inf
    for epoch in range(train_cfg.epochs):
        rng = np.random.default_rng([train_cfg.seed, epoch])
        if noisy:
            frames, labels = _stack(
                source.sequences(plan.train_subjects, rng=rng, noise_scale=train_cfg.noise_scale),
                model_cfg.num_classes,
            )
        else:
            frames, labels = clean_frames, clean_labels
        order = rng.permutation(len(frames))
        losses = []
        for start in range(0, len(order), train_cfg.batch_size):
            idx = order[start : start + train_cfg.batch_size]
            bf, bl = frames[idx], labels[idx]
            if train_cfg.augment:
                bf, bl = mix_batch(bf, bl, rng, mix_cfg)
            loss, grads = loss_and_grad(model, bf, bl, training=True, rng=rng)
            if not math.isfinite(loss):
                if out_dir is not None:
                    save_checkpoint(model, Path(out_dir) / "diverged.stpm")
                raise DivergedLossError(f"non-finite loss {loss} in epoch {epoch}, batch starting at {start}")
            adam_step(model, grads, state, train_cfg.lr)
            losses.append(loss)
        loss_curve.append(float(np.mean(losses)))
        val = evaluate(model, val_seqs)
        val_curve.append(val.accuracy)
        if val.accuracy > best_acc:
            best_acc = val.accuracy
            best = model.copy()
            metrics = val
            metrics.best_epoch = epoch
    metrics.loss_curve = loss_curve
    metrics.val_curve = val_curve
    return best, metrics


# ---------------------------------------------------------------- persistence


def _fmt(x) -> str:
    return repr(float(x))


def metrics_csv(m: Metrics) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["epoch", "train_loss", "val_acc"])
    for e, (loss, acc) in enumerate(zip(m.loss_curve, m.val_curve)):
        w.writerow([e, _fmt(loss), _fmt(acc)])
    return out.getvalue()


def confusion_csv(m: Metrics, class_names=None) -> str:
    c = m.confusion.shape[0]
    names = list(class_names) if class_names else [str(i) for i in range(c)]
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["true\\pred"] + names + ["recall"])
    for i in range(c):
        w.writerow([names[i]] + [int(v) for v in m.confusion[i]] + [_fmt(m.per_class_recall[i])])
    return out.getvalue()


def manifest_text(entries: dict) -> str:
    return "".join(f"{k} = {v}\n" for k, v in entries.items())


def write_outputs(out_dir, metrics: Metrics, manifest: dict, class_names=None, prefix: str = "") -> dict:
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {
            "metrics": out_dir / f"{prefix}metrics.csv",
            "confusion": out_dir / f"{prefix}confusion.csv",
            "manifest": out_dir / f"{prefix}manifest.txt",
        }
        paths["metrics"].write_text(metrics_csv(metrics))
        paths["confusion"].write_text(confusion_csv(metrics, class_names))
        paths["manifest"].write_text(manifest_text(manifest))
    except OSError as exc:
        raise IoFailure(f"cannot write results to {out_dir}: {exc}") from exc
    return paths


def run_manifest(model_cfg: ModelConfig, train_cfg: TrainConfig, plan: FoldPlan | None = None, **extra) -> dict:
    entries = {f"model.{k}": v for k, v in asdict(model_cfg).items()}
    entries.update({f"train.{k}": v for k, v in asdict(train_cfg).items()})
    if plan is not None:
        entries["fold"] = plan.fold_id
        entries["test_subjects"] = " ".join(map(str, plan.test_subjects))
        entries["train_subjects"] = " ".join(map(str, plan.train_subjects))
        entries["val_subjects"] = " ".join(map(str, plan.val_subjects))
    entries.update(extra)
    return entries


# ---------------------------------------------------------------- ablations


@dataclass
class AblationRow:
    axis: str
    value: str
    seed: int
    best_epoch: int
    val_acc: float
    test_acc: float


def run_ablation(
    axis: str,
    values,
    epochs: dict[int, list],
    montage,
    plan: FoldPlan,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    *,
    tsne_params: TsneParams | None = None,
    transform_method: str = "tsne",
    norm: str = "zscore",
) -> list[AblationRow]:
    """Train and test once per value along one axis, all else held fixed."""
    if axis not in ABLATION_AXES:
        raise InputError(f"unknown ablation axis {axis!r}; expected one of {ABLATION_AXES}")
    values = list(values)
    if axis == "transform":
        bad = [v for v in values if v not in METHODS]
    elif axis == "mixer":
        bad = [v for v in values if v not in ("stpool", "none")]
    else:
        n_samp = next(iter(epochs.values()))[0].signals.shape[1]
        bad = [v for v in values if int(v) < 1 or n_samp % int(v)]
    if bad:
        raise InputError(f"invalid {axis} values {bad}")

    assignments = {}

    def assignment(method):
        if method not in assignments:
            assignments[method] = assignment_for(transform(montage, method, tsne_params), model_cfg.h, model_cfg.w)
        return assignments[method]

    rows = []
    for v in values:
        method, cfg = transform_method, model_cfg
        if axis == "transform":
            method = v
        elif axis == "mixer":
            cfg = replace(model_cfg, mixer=v)
        else:
            cfg = replace(model_cfg, n_frames=int(v))
        source = EpochSource(epochs, assignment(method), cfg.n_frames, norm)
        best, val = train_fold(plan, source, cfg, train_cfg)
        test = evaluate(best, source.sequences(plan.test_subjects))
        rows.append(AblationRow(axis, str(v), train_cfg.seed, val.best_epoch, val.accuracy, test.accuracy))
    return rows


def ablation_csv(rows) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["axis", "value", "seed", "best_epoch", "val_acc", "test_acc"])
    for r in rows:
        w.writerow([r.axis, r.value, r.seed, r.best_epoch, _fmt(r.val_acc), _fmt(r.test_acc)])
    return out.getvalue()
