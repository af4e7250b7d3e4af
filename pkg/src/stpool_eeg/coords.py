"""3D electrode positions to 2D map coordinates.

Three layouts are provided: dropping z (parallel projection), azimuthal
equidistant projection about the vertex, and exact t-SNE started from an SVD
projection of the centred coordinates.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AntipodalPointError,
    DegenerateRankBelow2Error,
    InputError,
    KOutOfRangeError,
    NonConvergedBandwidthError,
    PerplexityOutOfRangeError,
)
from .montage import ElectrodeMontage

METHODS = ("parallel", "azimuthal", "tsne")

MAX_BISECTIONS = 200
ENTROPY_TOL = 1e-10
Q_FLOOR = 1e-12


@dataclass(frozen=True)
class CoordinateMap2D:
    labels: tuple[str, ...]
    coords2d: np.ndarray
    method: str

    def __post_init__(self):
        coords = np.asarray(self.coords2d, dtype=np.float64)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "coords2d", coords)
        if coords.shape != (len(self.labels), 2):
            raise InputError(f"coords2d shape {coords.shape} does not match {len(self.labels)} labels")
        if not np.all(np.isfinite(coords)):
            raise InputError("coordinate map contains non-finite values")
        if len(np.unique(coords, axis=0)) < 2:
            raise InputError("coordinate map needs at least two distinct points")

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(f"# method={self.method}\n")
        out.write("label,u,v\n")
        for lab, (u, v) in zip(self.labels, self.coords2d.tolist()):
            out.write(f"{lab},{u!r},{v!r}\n")
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "CoordinateMap2D":
        method = ""
        labels, rows = [], []
        header_seen = False
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "method=" in line:
                    method = line.split("method=", 1)[1].strip()
                continue
            if not header_seen:
                header_seen = True
                continue
            lab, u, v = line.split(",")
            labels.append(lab)
            rows.append((float(u), float(v)))
        return cls(tuple(labels), np.array(rows), method)


@dataclass(frozen=True)
class TsneParams:
    perplexity: float = 10.0
    n_iter: int = 1000
    early_exaggeration_factor: float = 12.0
    early_exaggeration_iters: int = 250
    learning_rate: float = 200.0
    momentum_initial: float = 0.5
    momentum_final: float = 0.8
    momentum_switch_iter: int = 250
    seed: int = 0

    def validate(self, n_points: int) -> None:
        upper = (n_points - 1) / 3
        if not 1 < self.perplexity < upper:
            raise PerplexityOutOfRangeError(
                f"perplexity {self.perplexity} outside (1, {upper:.4g}) for {n_points} electrodes"
            )
        if self.n_iter < self.early_exaggeration_iters:
            raise InputError("n_iter must be >= early_exaggeration_iters")
        if min(self.early_exaggeration_factor, self.learning_rate) <= 0:
            raise InputError("exaggeration factor and learning rate must be positive")
        if min(self.momentum_initial, self.momentum_final) < 0 or self.early_exaggeration_iters < 0:
            raise InputError("momenta and iteration counts must be non-negative")


@dataclass
class TsneResult:
    embedding: CoordinateMap2D
    kl_trace: np.ndarray  # KL(P||Q) with the un-exaggerated P, after each iteration
    P: np.ndarray
    conditional: np.ndarray = field(repr=False)
    betas: np.ndarray = field(repr=False)


def parallel_projection(m: ElectrodeMontage) -> CoordinateMap2D:
    return CoordinateMap2D(m.labels, m.coords3d[:, :2].copy(), "parallel")


def azimuthal_equidistant(m: ElectrodeMontage) -> CoordinateMap2D:
    """Project about the +z pole so that the distance from the centre is the polar angle."""
    u = m.coords3d / np.linalg.norm(m.coords3d, axis=1, keepdims=True)
    theta = np.arccos(np.clip(u[:, 2], -1.0, 1.0))
    bad = np.flatnonzero(theta > np.pi - 1e-9)
    if bad.size:
        raise AntipodalPointError(f"electrode {m.labels[bad[0]]!r} is antipodal to the projection centre")
    phi = np.arctan2(u[:, 1], u[:, 0])
    return CoordinateMap2D(m.labels, np.column_stack([theta * np.cos(phi), theta * np.sin(phi)]), "azimuthal")


def svd_init(m: ElectrodeMontage) -> CoordinateMap2D:
    """Project centred coordinates onto their top-2 right singular vectors.

    The first output column is rescaled to standard deviation 1e-4, the
    second by the same factor.
    """
    X = m.coords3d
    if X.shape[0] < 3:
        raise InputError("svd_init needs at least 3 electrodes")
    Xc = X - X.mean(axis=0)
    _, s, vt = np.linalg.svd(Xc, full_matrices=True)
    if s[0] == 0 or s[1] <= 1e-12 * s[0]:
        raise DegenerateRankBelow2Error("electrode coordinates span fewer than two dimensions")
    V = vt[:2].T.copy()
    for j in range(2):
        if V[np.argmax(np.abs(V[:, j])), j] < 0:
            V[:, j] = -V[:, j]
    Y = Xc @ V
    Y = Y / np.std(Y[:, 0]) * 1e-4
    return CoordinateMap2D(m.labels, Y, "svd")


def squared_distances(X: np.ndarray) -> np.ndarray:
    diff = X[:, None, :] - X[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _row_distribution(d: np.ndarray, beta: float) -> tuple[np.ndarray, float]:
    """Gaussian conditional over one row of squared distances and its entropy in bits."""
    shifted = -(d - d.min()) * beta
    w = np.exp(shifted)
    total = w.sum()
    p = w / total
    # H = log Z - sum p log w, in nats, with the max-shifted weights
    h_nats = np.log(total) - np.dot(p, shifted)
    return p, h_nats / np.log(2.0)


def conditional_affinities(sqdist: np.ndarray, perplexity: float) -> tuple[np.ndarray, np.ndarray]:
    """Row-stochastic p_{j|i} whose entropy equals log2(perplexity).

    Returns the conditional matrix and the per-row precisions
    beta_i = 1 / (2 sigma_i^2).  Rows whose off-diagonal distances are all
    equal get the uniform distribution for every bandwidth; no search is run
    for them.
    """
    n = sqdist.shape[0]
    target = np.log2(perplexity)
    P = np.zeros((n, n))
    betas = np.ones(n)
    for i in range(n):
        d = np.delete(sqdist[i], i)
        if np.all(d == d[0]):
            P[i, np.arange(n) != i] = 1.0 / (n - 1)
            continue
        beta, lo, hi = 1.0, 0.0, np.inf
        p, h = _row_distribution(d, beta)
        steps = 0
        while abs(h - target) > ENTROPY_TOL:
            if steps >= MAX_BISECTIONS:
                raise NonConvergedBandwidthError(
                    f"row {i}: entropy {h:.8f} bits after {MAX_BISECTIONS} bisections, target {target:.8f}"
                )
            if h > target:
                lo = beta
                beta = beta * 2.0 if np.isinf(hi) else 0.5 * (beta + hi)
            else:
                hi = beta
                beta = 0.5 * (beta + lo)
            p, h = _row_distribution(d, beta)
            steps += 1
        betas[i] = beta
        P[i, np.arange(n) != i] = p
    return P, betas


def joint_affinities(conditional: np.ndarray) -> np.ndarray:
    n = conditional.shape[0]
    return (conditional + conditional.T) / (2.0 * n)


def student_t_affinities(Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return normalised Q and the unnormalised kernel (1 + |y_i - y_j|^2)^-1 (zero diagonal)."""
    num = 1.0 / (1.0 + squared_distances(Y))
    np.fill_diagonal(num, 0.0)
    Q = num / max(num.sum(), Q_FLOOR)
    return Q, num


def kl_divergence(P: np.ndarray, Y: np.ndarray) -> float:
    Q, _ = student_t_affinities(Y)
    mask = P > 0
    return float(np.sum(P[mask] * np.log(P[mask] / np.maximum(Q[mask], np.finfo(float).tiny))))


def kl_gradient(P: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """dKL(P||Q)/dY = 4 sum_j (p_ij - q_ij)(y_i - y_j)(1 + |y_i - y_j|^2)^-1."""
    Q, num = student_t_affinities(Y)
    W = (P - Q) * num
    return 4.0 * (W.sum(axis=1)[:, None] * Y - W @ Y)


def tsne_run(m: ElectrodeMontage, p: TsneParams | None = None) -> TsneResult:
    p = p or TsneParams()
    n = len(m)
    p.validate(n)
    cond, betas = conditional_affinities(squared_distances(m.coords3d), p.perplexity)
    P = joint_affinities(cond)

    Y = svd_init(m).coords2d.copy()
    velocity = np.zeros_like(Y)
    trace = np.empty(p.n_iter)
    for it in range(p.n_iter):
        exaggerate = it < p.early_exaggeration_iters
        momentum = p.momentum_initial if it < p.momentum_switch_iter else p.momentum_final
        grad = kl_gradient(P * p.early_exaggeration_factor if exaggerate else P, Y)
        velocity = momentum * velocity - p.learning_rate * grad
        Y = Y + velocity
        trace[it] = kl_divergence(P, Y)
    return TsneResult(CoordinateMap2D(m.labels, Y, "tsne"), trace, P, cond, betas)


def tsne(m: ElectrodeMontage, p: TsneParams | None = None) -> CoordinateMap2D:
    return tsne_run(m, p).embedding


def transform(m: ElectrodeMontage, method: str, params: TsneParams | None = None) -> CoordinateMap2D:
    if method == "parallel":
        return parallel_projection(m)
    if method == "azimuthal":
        return azimuthal_equidistant(m)
    if method == "tsne":
        return tsne(m, params)
    raise InputError(f"unknown transform {method!r}; expected one of {', '.join(METHODS)}")


def _knn(points: np.ndarray, k: int) -> np.ndarray:
    d = squared_distances(points)
    np.fill_diagonal(d, np.inf)
    # stable sort: equal distances keep ascending electrode index
    return np.argsort(d, axis=1, kind="stable")[:, :k]


def neighbor_preservation(a: CoordinateMap2D, m: ElectrodeMontage, k: int) -> float:
    """Mean fraction of each electrode's k nearest 3D neighbours that stay among its 2D ones."""
    n = len(m)
    if not 1 <= k < n - 1:
        raise KOutOfRangeError(f"k={k} must satisfy 1 <= k < {n - 1}")
    if len(a.labels) != n:
        raise InputError("coordinate map and montage sizes differ")
    hi = _knn(m.coords3d, k)
    lo = _knn(a.coords2d, k)
    shared = [len(set(hi[i]) & set(lo[i])) for i in range(n)]
    return float(np.mean(shared) / k)
