"""Acceptance suite: one printed PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines appear in
the terminal summary under "acceptance criteria".
"""

import datetime
import time
from dataclasses import replace
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from helpers import numeric_grads, perturb, relative_errors, report
from stpool_eeg.coords import TsneParams, squared_distances, tsne_run
from stpool_eeg.edf import calibrate, parse_edf_header, read_edf, serialize_edf_header, write_edf
from stpool_eeg.harness import (
    EXCLUDED_SUBJECTS,
    EpochSource,
    TrainConfig,
    evaluate,
    split_subjects,
    train_fold,
    write_outputs,
)
from stpool_eeg.model import (
    ConvExtractor,
    ModelConfig,
    StPoolModel,
    encode_checkpoint,
    loss_and_grad,
    positional_encoding,
)
from stpool_eeg.synthetic import half_montage, make_epochs
from stpool_eeg.topomap import assignment_for, build_assignment

# ---------------------------------------------------------------- 1


def test_c01_gradient_oracle():
    cfg = ModelConfig(stage=2, c1=8, n_frames=8, h=16, w=16, num_blocks=2, drop_rate=0.0, layerscale_init=0.5)
    model = perturb(StPoolModel(cfg), seed=0, scale=0.1)
    rng = np.random.default_rng(1)
    frames = rng.standard_normal((2, 8, 16, 16))
    labels = np.array([[0.6, 0.4, 0.0, 0.0], [0.0, 0.0, 0.25, 0.75]])
    t0 = time.perf_counter()
    _, analytic = loss_and_grad(model, frames, labels)
    errs = relative_errors(analytic, numeric_grads(model, frames, labels, h=1e-5))
    elapsed = time.perf_counter() - t0
    worst = max(errs, key=errs.get)
    ok = errs[worst] <= 1e-4 and elapsed < 120
    report(1, "gradient oracle", ok,
           f"max rel err {errs[worst]:.2e} ({worst}), {model.n_parameters} params, {elapsed:.1f} s")
    assert errs[worst] <= 1e-4
    assert elapsed < 120


# ---------------------------------------------------------------- 2


def test_c02_feature_length():
    got = {}
    for stage, c1 in [(1, 8), (2, 8), (3, 16), (4, 80)]:
        ext = ConvExtractor(stage, c1)
        params = ext.init("ext", np.random.default_rng(0), np.float64)
        feats, _ = ext.forward(params, "ext", np.zeros((1, 16, 16)))
        got[(stage, c1)] = feats.shape[1]
    ok = all(v == 2 ** (s - 1) * c for (s, c), v in got.items()) and got[(4, 80)] == 640
    report(2, "feature length", ok, ", ".join(f"(s={s},c1={c})->{v}" for (s, c), v in got.items()))
    assert ok


# ---------------------------------------------------------------- 3


def test_c03_tsne_invariants(montage64):
    params = TsneParams(perplexity=10.0, seed=0)
    t0 = time.perf_counter()
    r = tsne_run(montage64, params)
    elapsed = time.perf_counter() - t0
    cond = r.conditional
    ent = np.array([-(row[row > 0] * np.log2(row[row > 0])).sum() for row in cond])
    ent_err = float(np.max(np.abs(ent - np.log2(params.perplexity))))
    sym = float(np.max(np.abs(r.P - r.P.T)))
    total = float(r.P.sum())
    rise = float(np.max(np.diff(r.kl_trace[-100:])))
    ok = ent_err <= 1e-5 and sym == 0.0 and abs(total - 1) <= 1e-9 and rise <= 1e-6 and elapsed < 30
    report(3, "t-SNE invariants", ok,
           f"entropy err {ent_err:.1e}, |P-P^T| {sym:.1e}, sum P-1 {total - 1:.1e}, "
           f"max KL rise (last 100) {rise:.1e}, final KL {r.kl_trace[-1]:.4f}, {elapsed:.1f} s")
    assert ent_err <= 1e-5
    assert sym == 0.0
    assert abs(total - 1) <= 1e-9
    assert rise <= 1e-6
    assert elapsed < 30


# ---------------------------------------------------------------- 4


def _scan(pixels, h, w):
    owner = np.empty((h, w), dtype=np.int64)
    for r in range(h):
        for c in range(w):
            dists = [(r - pr) ** 2 + (c - pc) ** 2 for pr, pc in pixels]
            owner[r, c] = dists.index(min(dists))
    return owner


def test_c04_rasterization_oracle():
    rng = np.random.default_rng(2024)
    mismatches = ties = 0
    for _ in range(1000):
        h, w = (int(v) for v in rng.integers(3, 17, size=2))
        n = int(rng.integers(2, min(h * w, 20) + 1))
        flat = rng.choice(h * w, size=n, replace=False)
        pixels = np.column_stack([flat // w, flat % w]).tolist()
        oracle = _scan(pixels, h, w)
        got = build_assignment(np.array(pixels), h, w).owner
        mismatches += int(not np.array_equal(got, oracle))
        d = np.array([[[(r - pr) ** 2 + (c - pc) ** 2 for pr, pc in pixels] for c in range(w)] for r in range(h)])
        ties += int(np.sum((d == d.min(axis=2, keepdims=True)).sum(axis=2) > 1))
    ok = mismatches == 0 and ties > 0
    report(4, "rasterization oracle", ok, f"{mismatches} mismatching layouts of 1000, {ties} tied pixels exercised")
    assert mismatches == 0
    assert ties > 0


# ---------------------------------------------------------------- 5


def test_c05_positional_encoding():
    mpmath.mp.dps = 40
    worst = 0.0
    for n_frames, l_dim in [(64, 64), (60, 16), (20, 2), (7, 10), (64, 8)]:
        pe = positional_encoding(n_frames, l_dim)
        for t in range(n_frames):
            for i in range(l_dim // 2):
                angle = mpmath.mpf(t) / mpmath.power(10000, mpmath.mpf(2 * i) / l_dim)
                worst = max(worst, abs(pe[t, 2 * i] - float(mpmath.sin(angle))),
                            abs(pe[t, 2 * i + 1] - float(mpmath.cos(angle))))
    ok = worst <= 1e-12
    report(5, "positional encoding", ok, f"max abs deviation {worst:.1e}")
    assert ok


# ---------------------------------------------------------------- 6


def test_c06_edf_round_trip(tmp_path):
    rate, seconds = 160, 4
    n = rate * seconds
    digital = ((np.arange(64)[:, None] * 997 + np.arange(n)[None, :] * 131) % 65536 - 32768).astype(np.int16)
    digital[0, :4] = [-32768, 32767, 0, -1]
    path = tmp_path / "fixture.edf"
    write_edf(path, [f"C{i:02d}" for i in range(64)], digital, rate,
              start=datetime.datetime(2009, 8, 12, 16, 15, 0))
    edf = read_edf(path)
    sig = edf.header.signals[0]
    gain = Fraction(sig.physical_max - sig.physical_min) / (sig.digital_max - sig.digital_min)
    exact = np.array([[float((int(d) - sig.digital_min) * gain + Fraction(sig.physical_min)) for d in row]
                      for row in digital])
    err = float(np.max(np.abs(edf.recording.samples - exact)))
    raw = path.read_bytes()[: edf.header.header_bytes]
    same = serialize_edf_header(parse_edf_header(raw)) == raw
    ok = err <= 1e-9 and same and edf.recording.samples.shape == (64, n) and edf.recording.sample_rate_hz == 160
    report(6, "EDF round trip", ok, f"max calibration err {err:.1e}, header bytes identical: {same}")
    assert err <= 1e-9
    assert same
    np.testing.assert_array_equal(edf.recording.samples, calibrate(digital, sig))


# ---------------------------------------------------------------- 7


def test_c07_split_hygiene():
    cohort = [s for s in range(1, 110) if s not in EXCLUDED_SUBJECTS]
    assert len(cohort) == 103
    problems = 0
    for seed in range(100):
        plans = split_subjects(range(1, 110), seed)
        sizes = sorted((len(p.test_subjects) for p in plans), reverse=True)
        tests = sorted(s for p in plans for s in p.test_subjects)
        problems += int(sizes != [21, 21, 21, 20, 20] or tests != cohort)
        for p in plans:
            sets = [set(p.train_subjects), set(p.val_subjects), set(p.test_subjects)]
            problems += int(bool(sets[0] & sets[1] or sets[0] & sets[2] or sets[1] & sets[2]))
            problems += int(bool((sets[0] | sets[1] | sets[2]) & EXCLUDED_SUBJECTS))
            problems += int(len(sets[0] | sets[1] | sets[2]) != 103)
    report(7, "split hygiene", problems == 0, f"{problems} violations over 100 seeds x 5 folds")
    assert problems == 0


# ---------------------------------------------------------------- 8-10

SMOKE_MODEL = ModelConfig(stage=2, c1=8, n_frames=20, h=16, w=16, num_blocks=2, num_classes=2)
SMOKE_TRAIN = TrainConfig(epochs=30, batch_size=8, lr=1e-4, seed=0)


def _smoke_run(mixer="stpool"):
    t0 = time.perf_counter()
    montage = half_montage()
    epochs = make_epochs(montage, n_subjects=40, epochs_per_subject=10, num_classes=2, separation=5.0, seed=0)
    a = assignment_for(tsne_run(montage, TsneParams(seed=0)).embedding, 16, 16)
    plan = split_subjects(sorted(epochs), seed=0)[0]
    source = EpochSource(epochs, a, SMOKE_MODEL.n_frames)
    best, val = train_fold(plan, source, replace(SMOKE_MODEL, mixer=mixer), SMOKE_TRAIN)
    train_acc = evaluate(best, source.sequences(plan.train_subjects)).accuracy
    test = evaluate(best, source.sequences(plan.test_subjects))
    return dict(best=best, val=val, test=test, train_acc=train_acc, plan=plan, seconds=time.perf_counter() - t0)


@pytest.fixture(scope="module")
def smoke():
    return _smoke_run()


@pytest.mark.slow
def test_c08_end_to_end_learning(smoke):
    ok = smoke["train_acc"] >= 0.95 and smoke["test"].accuracy >= 0.90 and smoke["seconds"] < 600
    report(8, "end-to-end learning", ok,
           f"train acc {smoke['train_acc']:.3f}, held-out acc {smoke['test'].accuracy:.3f} "
           f"({len(smoke['plan'].test_subjects)} subjects), best epoch {smoke['val'].best_epoch} of "
           f"{SMOKE_TRAIN.epochs}, {smoke['seconds']:.0f} s")
    assert smoke["train_acc"] >= 0.95
    assert smoke["test"].accuracy >= 0.90
    assert smoke["seconds"] < 600


@pytest.mark.slow
def test_c09_mixer_ablation(smoke):
    plain = _smoke_run(mixer="none")
    with_pool, without = smoke["test"].accuracy, plain["test"].accuracy
    ok = with_pool >= without - 0.02
    report(9, "mixer ablation", ok, f"held-out acc stpool {with_pool:.3f} vs none {without:.3f}")
    assert ok


@pytest.mark.slow
def test_c10_determinism(smoke, tmp_path):
    again = _smoke_run()
    files = {}
    for name, run in (("a", smoke), ("b", again)):
        out = tmp_path / name
        write_outputs(out, run["val"], {"seed": SMOKE_TRAIN.seed}, ["c0", "c1"])
        (out / "best.stpm").write_bytes(encode_checkpoint(run["best"]))
        files[name] = {p.name: p.read_bytes() for p in sorted(out.iterdir())}
    same = files["a"] == files["b"]
    report(10, "determinism", same, f"{len(files['a'])} files compared, byte-identical: {same}")
    assert same
