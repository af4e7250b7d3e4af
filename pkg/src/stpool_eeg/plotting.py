"""Figures written next to the CSV reports.

Everything renders off-screen with the Agg backend.  PNG output carries no
timestamps, so figures are byte-stable for identical inputs.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.ticker import MaxNLocator  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
    "savefig.bbox": "tight",
}


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_coordinate_map(cmap, path, annotate=True):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4, 4))
        xy = cmap.coords2d
        ax.scatter(xy[:, 0], xy[:, 1], s=18, color="k")
        if annotate:
            for lab, (u, v) in zip(cmap.labels, xy):
                ax.annotate(lab, (u, v), xytext=(2, 2), textcoords="offset points", fontsize=6)
        ax.set_aspect("equal", adjustable="datalim")
        ax.set_title(f"electrode layout ({cmap.method})")
        ax.set_xlabel("u")
        ax.set_ylabel("v")
        return _save(fig, path)


def plot_sequence(frames, path, max_frames=12, title=None):
    """Grid of the first ``max_frames`` frames on a shared colour scale."""
    frames = np.asarray(frames)[:max_frames]
    n = len(frames)
    cols = min(n, 6)
    rows = math.ceil(n / cols)
    lim = float(np.abs(frames).max()) or 1.0
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(rows, cols, figsize=(1.4 * cols, 1.4 * rows + 0.3), squeeze=False)
        for k, ax in enumerate(axes.flat):
            ax.set_axis_off()
            if k < n:
                ax.imshow(frames[k], cmap="RdBu_r", vmin=-lim, vmax=lim, origin="lower", interpolation="nearest")
                ax.set_title(f"t={k}", fontsize=7)
        if title:
            fig.suptitle(title)
        return _save(fig, path)


def plot_training_curves(metrics, path):
    epochs = np.arange(len(metrics.loss_curve))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3))
        ax.plot(epochs, metrics.loss_curve, color="k", label="train loss")
        ax.set_xlabel("epoch")
        ax.set_ylabel("loss")
        ax.xaxis.set_major_locator(MaxNLocator(integer=True))
        ax2 = ax.twinx()
        ax2.spines["right"].set_visible(True)
        ax2.plot(epochs, metrics.val_curve, color="tab:blue", ls="--", label="val acc")
        ax2.set_ylabel("validation accuracy")
        ax2.set_ylim(0, 1.02)
        if metrics.best_epoch >= 0:
            ax2.axvline(metrics.best_epoch, color="0.6", lw=0.8)
        lines = ax.get_lines() + ax2.get_lines()[:1]
        ax.legend(lines, [ln.get_label() for ln in lines], loc="center right", frameon=False)
        return _save(fig, path)


def plot_confusion(metrics, path, class_names=None):
    c = metrics.confusion
    names = class_names or [str(i) for i in range(len(c))]
    rows = c.sum(axis=1, keepdims=True)
    frac = np.divide(c, rows, out=np.zeros(c.shape), where=rows > 0)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(1 + 0.8 * len(c), 1 + 0.8 * len(c)))
        ax.imshow(frac, cmap="Greys", vmin=0, vmax=1)
        for i in range(len(c)):
            for j in range(len(c)):
                ax.text(j, i, f"{frac[i, j]:.2f}\n({c[i, j]})", ha="center", va="center",
                        color="w" if frac[i, j] > 0.5 else "k", fontsize=7)
        ax.set_xticks(range(len(c)), names)
        ax.set_yticks(range(len(c)), names)
        ax.set_xlabel("predicted")
        ax.set_ylabel("true")
        return _save(fig, path)


def plot_ablation(rows, path):
    labels = [r.value for r in rows]
    x = np.arange(len(rows))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(1.2 + 0.9 * len(rows), 3))
        ax.bar(x - 0.2, [r.val_acc for r in rows], 0.4, color="0.7", label="validation")
        ax.bar(x + 0.2, [r.test_acc for r in rows], 0.4, color="k", label="test")
        ax.set_xticks(x, labels)
        ax.set_ylim(0, 1.05)
        ax.set_ylabel("accuracy")
        if rows:
            ax.set_title(f"ablation: {rows[0].axis}")
        ax.legend(frameon=False, loc="lower right")
        return _save(fig, path)
