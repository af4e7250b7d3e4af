"""Glue from files on disk to epochs, layouts and sequence caches."""

from __future__ import annotations

import logging
from pathlib import Path

from .coords import transform
from .edf import read_edf
from .epochs import FEET_IMAGERY_RUNS, FIST_IMAGERY_RUNS, extract_epochs, scheme_classes
from .errors import InputError, IoFailure
from .montage import align_to_montage, load_montage, shipped_montage
from .synthetic import half_montage, make_epochs
from .topomap import assignment_for, build_sequence, write_sequences

log = logging.getLogger(__name__)


def parse_subjects(text: str) -> list[int]:
    """'1-5,9,12-13' -> [1, 2, 3, 4, 5, 9, 12, 13]"""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                lo, hi = (int(p) for p in part.split("-", 1))
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise InputError(f"bad subject list element {part!r}") from None
    return sorted(set(out))


def runs_for_scheme(scheme: str) -> list[int]:
    classes = scheme_classes(scheme)
    runs = list(FIST_IMAGERY_RUNS)
    if "O" in classes:
        runs.append(1)
    if "F" in classes:
        runs.extend(FEET_IMAGERY_RUNS)
    return sorted(runs)


def montage_for(cfg):
    if cfg["montage"]:
        try:
            return load_montage(Path(cfg["montage"]).read_text())
        except OSError as exc:
            raise IoFailure(f"cannot read montage {cfg['montage']}: {exc}") from exc
    return half_montage() if cfg["synthetic"] else shipped_montage()


def num_classes_for(cfg) -> int:
    if cfg["synthetic"]:
        return cfg["synthetic.num_classes"]
    return len(scheme_classes(cfg["scheme"]))


def class_names_for(cfg) -> list[str]:
    if cfg["synthetic"]:
        return [f"c{i}" for i in range(cfg["synthetic.num_classes"])]
    return list(scheme_classes(cfg["scheme"]))


def subject_epochs(data_dir, subject: int, scheme: str, window_s: float, montage) -> list:
    epochs = []
    found = False
    for run in runs_for_scheme(scheme):
        path = Path(data_dir) / f"S{subject:03d}R{run:02d}.edf"
        if not path.exists():
            log.warning("missing %s", path)
            continue
        found = True
        edf = read_edf(path)
        rec = align_to_montage(edf.recording, montage)
        epochs.extend(extract_epochs(rec, edf.events, scheme, window_s, run=run, subject_id=subject))
    if not found:
        raise InputError(f"no EDF runs for subject {subject} in {data_dir}")
    return epochs


def load_epochs(cfg, montage) -> dict[int, list]:
    if cfg["synthetic"]:
        return make_epochs(
            montage,
            n_subjects=cfg["synthetic.n_subjects"],
            epochs_per_subject=cfg["synthetic.epochs_per_subject"],
            num_classes=cfg["synthetic.num_classes"],
            window_s=cfg["synthetic.window_s"],
            separation=cfg["synthetic.separation"],
            seed=cfg["synthetic.seed"],
        )
    if not cfg["data_dir"]:
        raise InputError("set data_dir (or synthetic = true) to load epochs")
    return {
        s: subject_epochs(cfg["data_dir"], s, cfg["scheme"], cfg["window_s"], montage)
        for s in parse_subjects(cfg["subjects"])
    }


def layout(cfg, montage, method=None):
    method = method or cfg["transform"]
    return transform(montage, method, cfg.tsne_params())


def write_cache(cfg, out_dir, epochs, montage) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    a = assignment_for(layout(cfg, montage), cfg["model.h"], cfg["model.w"])
    paths = []
    for s in sorted(epochs):
        seqs = [build_sequence(e, a, cfg["model.n_frames"], cfg["norm"]) for e in epochs[s]]
        path = out_dir / f"S{s:03d}.topo"
        write_sequences(path, seqs)
        paths.append(path)
    return paths
