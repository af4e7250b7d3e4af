"""Shared oracles for the test modules."""

import numpy as np

from stpool_eeg.model import loss_and_grad


def numeric_grads(model, frames, labels, h=1e-5):
    """Central differences of the loss for every parameter entry."""
    out = {}
    for name, p in model.params.items():
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            lp, _ = loss_and_grad(model, frames, labels)
            flat[i] = old - h
            lm, _ = loss_and_grad(model, frames, labels)
            flat[i] = old
            gflat[i] = (lp - lm) / (2 * h)
        out[name] = g
    return out


def relative_errors(analytic, numeric):
    """Per-tensor ||a - n|| / (||a|| + ||n||); 0 where both vanish."""
    errs = {}
    for name in analytic:
        a, n = analytic[name], numeric[name]
        denom = np.linalg.norm(a) + np.linalg.norm(n)
        errs[name] = 0.0 if denom == 0 else float(np.linalg.norm(a - n) / denom)
    return errs


def perturb(model, seed=0, scale=0.3):
    """Move every parameter away from its structured init so no gradient is trivially zero."""
    rng = np.random.default_rng(seed)
    for p in model.params.values():
        p += scale * rng.standard_normal(p.shape)
    return model


ACCEPTANCE_LINES: list[str] = []


def report(number: int, title: str, ok: bool, detail: str) -> None:
    """Record one acceptance verdict; conftest prints them in the terminal summary."""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
