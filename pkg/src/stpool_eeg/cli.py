"""``stpool`` command line.

Exit codes: 0 success, 2 input/parse error, 3 numeric failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness, plotting
from .coords import METHODS, TsneParams, transform
from .config import RunConfig
from .edf import read_edf
from .epochs import extract_epochs, parse_physionet_name
from .errors import InputError, IoFailure, StPoolError
from .harness import CacheSource, TrainConfig
from .model import load_checkpoint, save_checkpoint
from .montage import align_to_montage, load_montage, shipped_montage
from .pipeline import (
    class_names_for,
    layout,
    load_epochs,
    montage_for,
    num_classes_for,
    write_cache,
)
from .synthetic import write_physionet_like
from .topomap import assignment_for, build_sequence, export_image

log = logging.getLogger("stpool")

TSNE_FLAGS = {
    "perplexity": float,
    "n_iter": int,
    "early_exaggeration_factor": float,
    "early_exaggeration_iters": int,
    "learning_rate": float,
    "momentum_initial": float,
    "momentum_final": float,
    "momentum_switch_iter": int,
}


def _emit_manifest(entries: dict, out=None):
    text = harness.manifest_text(entries)
    sys.stdout.write(text)
    if out is not None:
        try:
            Path(out).write_text(text)
        except OSError as exc:
            raise IoFailure(f"cannot write manifest {out}: {exc}") from exc


def _config(args) -> RunConfig:
    overrides = list(args.set or [])
    for key, attr in (
        ("cache_dir", "cache"),
        ("data_dir", "data_dir"),
        ("train.epochs", "epochs"),
        ("train.seed", "seed"),
        ("fold", "fold"),
        ("synthetic", "synthetic"),
    ):
        value = getattr(args, attr, None)
        if value is not None and value is not False:
            overrides.append((key, value))
    return RunConfig.load(getattr(args, "config", None), overrides)


# ---------------------------------------------------------------- commands


def cmd_inspect(args):
    path = Path(args.edf)
    if not path.is_file():
        raise InputError(f"no such file: {path}")
    edf = read_edf(path)
    h, rec = edf.header, edf.recording
    lines = [
        f"file: {path}",
        f"version: {h.version}",
        f"patient_id: {h.patient_id}",
        f"recording_id: {h.recording_id}",
        f"start: {h.start_datetime.isoformat()}",
        f"header_bytes: {h.header_bytes}",
        f"n_records: {h.n_records}",
        f"record_duration: {h.record_duration:g}",
        f"n_signals: {h.n_signals}",
        f"sample_rate: {rec.sample_rate_hz:g}",
        f"duration_s: {rec.duration_s:g}",
        "channels: " + " ".join(rec.channel_labels),
        f"events: {len(edf.events)}",
    ]
    lines += [f"  {e.onset_s:g}\t{e.duration_s:g}\t{e.label}" for e in edf.events]
    print("\n".join(lines))
    return 0


def cmd_coords(args):
    if args.montage and not Path(args.montage).is_file():
        raise InputError(f"no such file: {args.montage}")
    m = load_montage(Path(args.montage).read_text()) if args.montage else shipped_montage()
    values = {k: getattr(args, k) for k in TSNE_FLAGS if getattr(args, k) is not None}
    params = TsneParams(seed=args.seed, **values)
    cmap = transform(m, args.method, params)
    text = cmap.to_csv()
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            raise IoFailure(f"cannot write {args.out}: {exc}") from exc
    else:
        sys.stdout.write(text)
    if args.figure:
        plotting.plot_coordinate_map(cmap, args.figure)
    return 0


def cmd_render(args):
    cfg = _config(args)
    montage = montage_for(cfg)
    if cfg["synthetic"]:
        epochs = load_epochs(cfg, montage)
        epoch = epochs[sorted(epochs)[0]][args.index]
    else:
        if not args.edf:
            raise InputError("render needs --edf or --synthetic")
        subject, run = parse_physionet_name(Path(args.edf).name)
        edf = read_edf(args.edf)
        rec = align_to_montage(edf.recording, montage)
        found = extract_epochs(rec, edf.events, cfg["scheme"], cfg["window_s"], run=run, subject_id=subject)
        if not found:
            raise InputError(f"{args.edf} yields no epochs for scheme {cfg['scheme']}")
        epoch = found[args.index]
    a = assignment_for(layout(cfg, montage), cfg["model.h"], cfg["model.w"])
    seq = build_sequence(epoch, a, cfg["model.n_frames"], cfg["norm"])
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {out}: {exc}") from exc
    width = max(3, len(str(len(seq.frames) - 1)))
    for t, frame in enumerate(seq.frames):
        export_image(frame, out / f"frame_{t:0{width}d}.pgm")
    if args.figures:
        plotting.plot_sequence(seq.frames, Path(args.figures) / "sequence.png", title=f"label {seq.label}")
    _emit_manifest(cfg.manifest() | {"frames_written": len(seq.frames), "label": seq.label})
    return 0


def cmd_cache(args):
    cfg = _config(args)
    if not cfg["cache_dir"]:
        raise InputError("cache needs --cache (or cache_dir in the config)")
    montage = montage_for(cfg)
    epochs = load_epochs(cfg, montage)
    paths = write_cache(cfg, cfg["cache_dir"], epochs, montage)
    n_seq = sum(len(v) for v in epochs.values())
    _emit_manifest(
        cfg.manifest() | {"subjects_cached": len(paths), "sequences": n_seq},
        Path(cfg["cache_dir"]) / "cache_manifest.txt",
    )
    return 0


def _plan(cfg, source):
    subjects = source.subjects()
    if not subjects:
        raise InputError(f"no cached subjects in {cfg['cache_dir']}")
    plans = harness.split_subjects(subjects, cfg["split_seed"])
    if not 0 <= cfg["fold"] < len(plans):
        raise InputError(f"fold must be in 0..{len(plans) - 1}")
    return plans[cfg["fold"]]


def cmd_train(args):
    cfg = _config(args)
    if not cfg["cache_dir"]:
        raise InputError("train needs --cache (or cache_dir in the config)")
    source = CacheSource(cfg["cache_dir"])
    plan = _plan(cfg, source)
    model_cfg = cfg.model_config(num_classes_for(cfg))
    train_cfg = cfg.train_config()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    best, metrics = harness.train_fold(plan, source, model_cfg, train_cfg, out_dir=out)
    save_checkpoint(best, out / "best.stpm")
    manifest = cfg.manifest() | harness.run_manifest(model_cfg, train_cfg, plan) | {
        "best_epoch": metrics.best_epoch,
        "val_acc": repr(metrics.accuracy),
    }
    names = class_names_for(cfg)
    harness.write_outputs(out, metrics, manifest, names)
    if args.figures and metrics.loss_curve:
        plotting.plot_training_curves(metrics, Path(args.figures) / "training.png")
        plotting.plot_confusion(metrics, Path(args.figures) / "val_confusion.png", names)
    _emit_manifest(manifest)
    return 0


def cmd_eval(args):
    cfg = _config(args)
    if not cfg["cache_dir"]:
        raise InputError("eval needs --cache (or cache_dir in the config)")
    source = CacheSource(cfg["cache_dir"])
    plan = _plan(cfg, source)
    model = load_checkpoint(args.checkpoint)
    metrics = harness.evaluate(model, source.sequences(plan.test_subjects))
    manifest = cfg.manifest() | harness.run_manifest(model.cfg, TrainConfig(), plan) | {
        "checkpoint": str(Path(args.checkpoint).resolve()),
        "test_acc": repr(metrics.accuracy),
    }
    names = class_names_for(cfg)
    harness.write_outputs(args.out, metrics, manifest, names, prefix="test_")
    if args.figures:
        plotting.plot_confusion(metrics, Path(args.figures) / "test_confusion.png", names)
    _emit_manifest(manifest)
    return 0


DEFAULT_AXIS_VALUES = {
    "transform": list(METHODS),
    "mixer": ["stpool", "none"],
    "n_frames": ["30", "60", "96", "120"],
}


def cmd_ablate(args):
    cfg = _config(args)
    montage = montage_for(cfg)
    epochs = load_epochs(cfg, montage)
    values = args.values.split(",") if args.values else DEFAULT_AXIS_VALUES[args.axis]
    plan = harness.split_subjects(list(epochs), cfg["split_seed"])[cfg["fold"]]
    model_cfg = cfg.model_config(num_classes_for(cfg))
    train_cfg = cfg.train_config()
    rows = harness.run_ablation(
        args.axis,
        values,
        epochs,
        montage,
        plan,
        model_cfg,
        train_cfg,
        tsne_params=cfg.tsne_params(),
        transform_method=cfg["transform"],
        norm=cfg["norm"],
    )
    text = harness.ablation_csv(rows)
    try:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {args.out}: {exc}") from exc
    if args.figures:
        plotting.plot_ablation(rows, Path(args.figures) / f"ablation_{args.axis}.png")
    _emit_manifest(cfg.manifest() | harness.run_manifest(model_cfg, train_cfg, plan) | {"axis": args.axis})
    return 0


def cmd_synth(args):
    subjects = [int(s) for s in args.subjects.split(",")]
    runs = [int(r) for r in args.runs.split(",")]
    paths = write_physionet_like(args.out, subjects, runs, duration_s=args.duration, seed=args.seed)
    for p in paths:
        print(p)
    return 0


# ---------------------------------------------------------------- parser


def _common(p, train_like=True):
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key (repeatable)")
    p.add_argument("--synthetic", action="store_true", default=None, help="use the built-in synthetic dataset")
    p.add_argument("--figures", help="directory for PNG figures")
    if train_like:
        p.add_argument("--cache", help="sequence cache directory")
        p.add_argument("--fold", type=int)
        p.add_argument("--seed", type=int, help="training seed")
        p.add_argument("--epochs", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stpool", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="print EDF header fields, channels and events")
    p.add_argument("edf")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("coords", help="compute 2D electrode coordinates")
    p.add_argument("montage", nargs="?", help="label,x,y,z CSV (default: shipped 10-10 layout)")
    p.add_argument("--method", choices=METHODS, default="tsne")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--figure", help="PNG scatter of the layout")
    for name, kind in TSNE_FLAGS.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=kind)
    p.set_defaults(func=cmd_coords)

    p = sub.add_parser("render", help="write one epoch's topomap frames as PGM images")
    _common(p, train_like=False)
    p.add_argument("--edf", help="PhysioNet-style SxxxRyy.edf file")
    p.add_argument("--index", type=int, default=0, help="epoch index within the file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("cache", help="materialise topomap sequences per subject")
    _common(p)
    p.add_argument("--data-dir")
    p.set_defaults(func=cmd_cache)

    p = sub.add_parser("train", help="train one cross-individual fold")
    _common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a fold's test subjects")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="compare transforms, mixers or frame counts")
    _common(p)
    p.add_argument("--data-dir")
    p.add_argument("--axis", choices=harness.ABLATION_AXES, required=True)
    p.add_argument("--values", help="comma-separated axis values")
    p.add_argument("--out", required=True, help="CSV output path")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("synth", help="write synthetic PhysioNet-style EDF+ files")
    p.add_argument("--out", required=True)
    p.add_argument("--subjects", default="1,2")
    p.add_argument("--runs", default="1,4,6")
    p.add_argument("--duration", type=int, default=60)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except StPoolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
