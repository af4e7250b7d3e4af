"""ST-pooling classifier over topomap sequences, with analytic gradients.

Pipeline per sample: a spatial extractor turns every H x W frame into an
L-vector, the N x L stack gets a sinusoidal positional encoding, passes a
stack of pooling blocks (pre-norm, LayerScale, average pooling over the
time x feature plane as token mixer), a final LayerNorm, a mean over time,
and a linear softmax head.

All arrays are batch-first.  Activations inside the extractor are kept
channels-last, (M, H, W, C).
"""

from __future__ import annotations

import struct
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    ConfigInvalidError,
    EmptyBatchError,
    IoFailure,
    OddDimensionError,
    ShapeMismatchError,
    VersionMismatchError,
)

LN_EPS = 1e-10
_GELU_C = np.sqrt(2.0 / np.pi)


@dataclass(frozen=True)
class ModelConfig:
    stage: int = 2
    c1: int = 8
    n_frames: int = 60
    h: int = 32
    w: int = 32
    num_blocks: int = 4
    pool_kernel: int = 3
    mlp_ratio: float = 4.0
    num_classes: int = 4
    layerscale_init: float = 1e-5
    drop_rate: float = 0.1
    shared_extractor: bool = True
    seed: int = 0
    mixer: str = "stpool"
    precision: str = "float64"

    @property
    def feature_dim(self) -> int:
        return 2 ** (self.stage - 1) * self.c1

    @property
    def hidden_dim(self) -> int:
        return int(round(self.mlp_ratio * self.feature_dim))

    @property
    def dtype(self):
        return np.float32 if self.precision == "float32" else np.float64

    def validate(self) -> "ModelConfig":
        problems = []
        if self.stage < 1 or self.c1 < 1:
            problems.append("stage and c1 must be >= 1")
        if self.pool_kernel < 1 or self.pool_kernel % 2 == 0:
            problems.append(f"pool_kernel must be odd and >= 1, got {self.pool_kernel}")
        if not 0 <= self.drop_rate < 1:
            problems.append(f"drop_rate must be in [0, 1), got {self.drop_rate}")
        if self.layerscale_init <= 0:
            problems.append("layerscale_init must be positive")
        if min(self.n_frames, self.h, self.w, self.num_classes) < 1 or self.num_blocks < 0:
            problems.append("frame count, grid size and class count must be positive")
        if self.hidden_dim < 1:
            problems.append("mlp_ratio too small")
        if self.mixer not in ("stpool", "none"):
            problems.append(f"mixer must be 'stpool' or 'none', got {self.mixer!r}")
        if self.precision not in ("float64", "float32"):
            problems.append(f"precision must be float64 or float32, got {self.precision!r}")
        if self.feature_dim % 2:
            problems.append(f"feature length {self.feature_dim} must be even for the positional encoding")
        if problems:
            raise ConfigInvalidError("; ".join(problems))
        return self


# ---------------------------------------------------------------- primitives


def gelu(x):
    return 0.5 * x * (1.0 + np.tanh(_GELU_C * (x + 0.044715 * x**3)))


def gelu_grad(x):
    inner = _GELU_C * (x + 0.044715 * x**3)
    t = np.tanh(inner)
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * _GELU_C * (1.0 + 3 * 0.044715 * x * x)


def layer_norm(x, gain, bias):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + LN_EPS)
    xhat = xc * inv
    return xhat * gain + bias, (xhat, inv)


def layer_norm_backward(dy, gain, cache):
    xhat, inv = cache
    dxhat = dy * gain
    dx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True) - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
    red = tuple(range(dy.ndim - 1))
    return dx, (dy * xhat).sum(axis=red), dy.sum(axis=red)


def _box_sum(x, k):
    r = k // 2
    n, l = x.shape[-2:]
    pad = [(0, 0)] * (x.ndim - 2) + [(r, r), (r, r)]
    xp = np.pad(x, pad)
    acc = np.zeros_like(x)
    for dy in range(k):
        for dx in range(k):
            acc += xp[..., dy : dy + n, dx : dx + l]
    return acc


def _window_counts(n, l, k):
    return _box_sum(np.ones((n, l)), k)


def pool2d(x, k):
    """Stride-1 mean over k x k windows on the last two axes, clipped at the borders."""
    if k < 1 or k % 2 == 0:
        raise ConfigInvalidError(f"pool kernel must be odd, got {k}")
    x = np.asarray(x)
    if k == 1:
        return x.copy()
    return _box_sum(x, k) / _window_counts(*x.shape[-2:], k)


def pool2d_backward(dy, k):
    if k == 1:
        return dy.copy()
    return _box_sum(dy / _window_counts(*dy.shape[-2:], k), k)


def positional_encoding(n_frames: int, l_dim: int) -> np.ndarray:
    if l_dim % 2:
        raise OddDimensionError(f"positional encoding needs an even feature length, got {l_dim}")
    pos = np.arange(n_frames, dtype=np.float64)[:, None]
    div = np.power(10000.0, 2.0 * np.arange(l_dim // 2) / l_dim)
    pe = np.empty((n_frames, l_dim))
    pe[:, 0::2] = np.sin(pos / div)
    pe[:, 1::2] = np.cos(pos / div)
    return pe


def log_softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(z):
    return np.exp(log_softmax(z))


# ---------------------------------------------------------------- extractor


class ConvExtractor:
    """Reference spatial extractor standing in for a large vision backbone.

    ``stage`` stride-2 3x3 convolutions with bias and GELU; the k-th has
    ``c1 * 2**(k-1)`` output channels.  The last map is averaged to one value
    per channel, so the output length is ``2**(stage-1) * c1``.
    """

    def __init__(self, stage: int, c1: int):
        if stage < 1 or c1 < 1:
            raise ConfigInvalidError("extractor needs stage >= 1 and c1 >= 1")
        self.stage = stage
        self.channels = [1] + [c1 * 2**k for k in range(stage)]

    @property
    def output_length(self) -> int:
        return self.channels[-1]

    def param_shapes(self, prefix: str):
        shapes = []
        for k in range(self.stage):
            cin, cout = self.channels[k], self.channels[k + 1]
            shapes.append((f"{prefix}.conv{k}.weight", (cout, cin, 3, 3)))
            shapes.append((f"{prefix}.conv{k}.bias", (cout,)))
        return shapes

    def init(self, prefix, rng, dtype):
        out = {}
        for name, shape in self.param_shapes(prefix):
            if name.endswith("weight"):
                std = np.sqrt(2.0 / (shape[1] * 9))
                out[name] = (rng.standard_normal(shape) * std).astype(dtype)
            else:
                out[name] = np.zeros(shape, dtype=dtype)
        return out

    @staticmethod
    def _conv(x, weight, bias):
        m, h, w, c = x.shape
        ho, wo = (h - 1) // 2 + 1, (w - 1) // 2 + 1
        xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
        cols = np.stack(
            [xp[:, i : i + 2 * ho - 1 : 2, j : j + 2 * wo - 1 : 2, :] for i in range(3) for j in range(3)],
            axis=3,
        ).reshape(m * ho * wo, 9 * c)
        wmat = weight.transpose(2, 3, 1, 0).reshape(9 * c, -1)
        out = (cols @ wmat + bias).reshape(m, ho, wo, -1)
        return out, (cols, x.shape, ho, wo)

    @staticmethod
    def _conv_backward(dout, weight, cache):
        cols, (m, h, w, c), ho, wo = cache
        cout = weight.shape[0]
        d2 = dout.reshape(-1, cout)
        wmat = weight.transpose(2, 3, 1, 0).reshape(9 * c, cout)
        dweight = (cols.T @ d2).reshape(3, 3, c, cout).transpose(3, 2, 0, 1)
        dbias = d2.sum(axis=0)
        dcols = (d2 @ wmat.T).reshape(m, ho, wo, 9, c)
        dxp = np.zeros((m, h + 2, w + 2, c), dtype=dout.dtype)
        for idx in range(9):
            i, j = divmod(idx, 3)
            dxp[:, i : i + 2 * ho - 1 : 2, j : j + 2 * wo - 1 : 2, :] += dcols[:, :, :, idx, :]
        return dxp[:, 1:-1, 1:-1, :], dweight, dbias

    def forward(self, params, prefix, frames):
        """frames: (M, H, W) -> features (M, L)."""
        x = frames[..., None]
        caches = []
        for k in range(self.stage):
            pre, cc = self._conv(x, params[f"{prefix}.conv{k}.weight"], params[f"{prefix}.conv{k}.bias"])
            caches.append((cc, pre))
            x = gelu(pre)
        return x.mean(axis=(1, 2)), (caches, x.shape)

    def backward(self, params, prefix, cache, dfeat):
        caches, shape = cache
        m, ho, wo, c = shape
        dx = np.broadcast_to(dfeat[:, None, None, :] / (ho * wo), shape)
        grads = {}
        for k in reversed(range(self.stage)):
            cc, pre = caches[k]
            dpre = dx * gelu_grad(pre)
            weight = params[f"{prefix}.conv{k}.weight"]
            dx, grads[f"{prefix}.conv{k}.weight"], grads[f"{prefix}.conv{k}.bias"] = self._conv_backward(
                dpre, weight, cc
            )
        return grads


def make_extractor(cfg: ModelConfig) -> ConvExtractor:
    cfg.validate()
    return ConvExtractor(cfg.stage, cfg.c1)


# ---------------------------------------------------------------- model


def parameter_shapes(cfg: ModelConfig):
    """Canonical (name, shape) order used for initialisation and checkpoints."""
    ext = make_extractor(cfg)
    L, Hd = cfg.feature_dim, cfg.hidden_dim
    shapes = []
    if cfg.shared_extractor:
        shapes += ext.param_shapes("ext")
    else:
        for n in range(cfg.n_frames):
            shapes += ext.param_shapes(f"ext{n}")
    for b in range(cfg.num_blocks):
        p = f"block{b}"
        shapes += [
            (f"{p}.norm1.gain", (L,)),
            (f"{p}.norm1.bias", (L,)),
            (f"{p}.scale1", (L,)),
            (f"{p}.norm2.gain", (L,)),
            (f"{p}.norm2.bias", (L,)),
            (f"{p}.scale2", (L,)),
            (f"{p}.fc1.weight", (L, Hd)),
            (f"{p}.fc1.bias", (Hd,)),
            (f"{p}.fc2.weight", (Hd, L)),
            (f"{p}.fc2.bias", (L,)),
        ]
    shapes += [
        ("norm.gain", (L,)),
        ("norm.bias", (L,)),
        ("head.weight", (L, cfg.num_classes)),
        ("head.bias", (cfg.num_classes,)),
    ]
    return shapes


class StPoolModel:
    def __init__(self, cfg: ModelConfig, params: dict[str, np.ndarray] | None = None):
        self.cfg = cfg.validate()
        self.extractor = make_extractor(cfg)
        self.pe = positional_encoding(cfg.n_frames, cfg.feature_dim).astype(cfg.dtype)
        if params is None:
            params = self._init_params()
        expected = parameter_shapes(cfg)
        if [n for n, _ in expected] != list(params):
            raise ShapeMismatchError("parameter names do not match the configuration")
        for name, shape in expected:
            if params[name].shape != tuple(shape):
                raise ShapeMismatchError(f"{name}: shape {params[name].shape}, expected {tuple(shape)}")
        self.params = params

    def _init_params(self):
        cfg = self.cfg
        rng = np.random.default_rng(cfg.seed)
        dt = cfg.dtype
        params = {}
        if cfg.shared_extractor:
            params.update(self.extractor.init("ext", rng, dt))
        else:
            for n in range(cfg.n_frames):
                params.update(self.extractor.init(f"ext{n}", rng, dt))
        for name, shape in parameter_shapes(cfg):
            if name in params:
                continue
            if name.endswith(("gain",)):
                params[name] = np.ones(shape, dtype=dt)
            elif name.endswith((".scale1", ".scale2")):
                init = 0.0 if (name.endswith("scale1") and cfg.mixer == "none") else cfg.layerscale_init
                params[name] = np.full(shape, init, dtype=dt)
            elif name.endswith("weight"):
                params[name] = (np.clip(rng.standard_normal(shape), -2, 2) * 0.02).astype(dt)
            else:
                params[name] = np.zeros(shape, dtype=dt)
        return params

    @property
    def n_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    def copy(self) -> "StPoolModel":
        return StPoolModel(self.cfg, {k: v.copy() for k, v in self.params.items()})


def _check_frames(model, frames):
    frames = np.asarray(frames, dtype=model.cfg.dtype)
    single = frames.ndim == 3
    if single:
        frames = frames[None]
    cfg = model.cfg
    if frames.ndim != 4 or frames.shape[1:] != (cfg.n_frames, cfg.h, cfg.w):
        raise ShapeMismatchError(
            f"expected frames (B, {cfg.n_frames}, {cfg.h}, {cfg.w}), got {np.shape(frames)}"
        )
    return frames, single


def _extract(model, frames):
    cfg, P = model.cfg, model.params
    b, n = frames.shape[:2]
    if cfg.shared_extractor:
        feats, cache = model.extractor.forward(P, "ext", frames.reshape(b * n, cfg.h, cfg.w))
        return feats.reshape(b, n, -1), cache
    feats, caches = [], []
    for i in range(n):
        f, c = model.extractor.forward(P, f"ext{i}", frames[:, i])
        feats.append(f)
        caches.append(c)
    return np.stack(feats, axis=1), caches


def _extract_backward(model, cache, dfeats):
    cfg, P = model.cfg, model.params
    b, n, L = dfeats.shape
    if cfg.shared_extractor:
        return model.extractor.backward(P, "ext", cache, dfeats.reshape(b * n, L))
    grads = {}
    for i in range(n):
        grads.update(model.extractor.backward(P, f"ext{i}", cache[i], dfeats[:, i]))
    return grads


def stpool_block(x, params, prefix, k, *, mixer="stpool", training=False, drop_rate=0.0, rng=None):
    """One pre-norm pooling block on (..., N, L); returns (output, cache)."""
    P = params
    a, ln1 = layer_norm(x, P[f"{prefix}.norm1.gain"], P[f"{prefix}.norm1.bias"])
    if mixer == "stpool":
        mixed = pool2d(a, k) - a
    else:
        mixed = np.zeros_like(a)
    u = x + P[f"{prefix}.scale1"] * mixed
    c, ln2 = layer_norm(u, P[f"{prefix}.norm2.gain"], P[f"{prefix}.norm2.bias"])
    hpre = c @ P[f"{prefix}.fc1.weight"] + P[f"{prefix}.fc1.bias"]
    hact = gelu(hpre)
    o = hact @ P[f"{prefix}.fc2.weight"] + P[f"{prefix}.fc2.bias"]
    mask = None
    if training and drop_rate > 0:
        if rng is None:
            raise ConfigInvalidError("dropout in training mode needs an RNG")
        mask = (rng.random(o.shape) >= drop_rate).astype(o.dtype) / (1.0 - drop_rate)
        d = o * mask
    else:
        d = o
    y = u + P[f"{prefix}.scale2"] * d
    return y, (ln1, mixed, ln2, c, hpre, hact, d, mask, mixer, k)


def stpool_block_backward(dy, params, prefix, cache):
    P = params
    ln1, mixed, ln2, c, hpre, hact, d, mask, mixer, k = cache
    red = tuple(range(dy.ndim - 1))
    g = {}
    g[f"{prefix}.scale2"] = (dy * d).sum(axis=red)
    dd = dy * P[f"{prefix}.scale2"]
    do = dd if mask is None else dd * mask
    g[f"{prefix}.fc2.weight"] = hact.reshape(-1, hact.shape[-1]).T @ do.reshape(-1, do.shape[-1])
    g[f"{prefix}.fc2.bias"] = do.sum(axis=red)
    dh = (do @ P[f"{prefix}.fc2.weight"].T) * gelu_grad(hpre)
    g[f"{prefix}.fc1.weight"] = c.reshape(-1, c.shape[-1]).T @ dh.reshape(-1, dh.shape[-1])
    g[f"{prefix}.fc1.bias"] = dh.sum(axis=red)
    dc = dh @ P[f"{prefix}.fc1.weight"].T
    dln2, g[f"{prefix}.norm2.gain"], g[f"{prefix}.norm2.bias"] = layer_norm_backward(dc, P[f"{prefix}.norm2.gain"], ln2)
    du = dy + dln2
    g[f"{prefix}.scale1"] = (du * mixed).sum(axis=red)
    if mixer == "stpool":
        dm = du * P[f"{prefix}.scale1"]
        da = pool2d_backward(dm, k) - dm
    else:
        # frozen: with no mixer the branch scale carries no gradient
        g[f"{prefix}.scale1"] = np.zeros_like(g[f"{prefix}.scale1"])
        da = np.zeros_like(du)
    dln1, g[f"{prefix}.norm1.gain"], g[f"{prefix}.norm1.bias"] = layer_norm_backward(da, P[f"{prefix}.norm1.gain"], ln1)
    return du + dln1, g


def _forward(model, frames, training=False, rng=None):
    cfg, P = model.cfg, model.params
    feats, ext_cache = _extract(model, frames)
    x = feats + model.pe
    block_caches = []
    for b in range(cfg.num_blocks):
        x, c = stpool_block(
            x,
            P,
            f"block{b}",
            cfg.pool_kernel,
            mixer=cfg.mixer,
            training=training,
            drop_rate=cfg.drop_rate,
            rng=rng,
        )
        block_caches.append(c)
    f, ln = layer_norm(x, P["norm.gain"], P["norm.bias"])
    pooled = f.mean(axis=1)
    logits = pooled @ P["head.weight"] + P["head.bias"]
    return logits, (ext_cache, block_caches, ln, pooled)


def forward(model: StPoolModel, frames, training: bool = False, rng=None) -> np.ndarray:
    """Class probabilities for (B, N, H, W) frames, or (N, H, W) for a single sequence."""
    frames, single = _check_frames(model, frames)
    logits, _ = _forward(model, frames, training, rng)
    probs = softmax(logits)
    return probs[0] if single else probs


def features(model: StPoolModel, frames) -> np.ndarray:
    """Extractor output stacked over time, (B, N, L), before the positional encoding."""
    frames, _ = _check_frames(model, frames)
    return _extract(model, frames)[0]


def loss_and_grad(model: StPoolModel, frames, labels, training: bool = False, rng=None):
    """Mean soft-label cross-entropy and its gradient for every parameter."""
    frames, _ = _check_frames(model, frames)
    labels = np.asarray(labels, dtype=model.cfg.dtype)
    if frames.shape[0] == 0:
        raise EmptyBatchError("loss of an empty batch")
    if labels.shape != (frames.shape[0], model.cfg.num_classes):
        raise ShapeMismatchError(f"labels shape {labels.shape} for batch of {frames.shape[0]}")
    cfg, P = model.cfg, model.params
    bsz, n = frames.shape[:2]
    logits, (ext_cache, block_caches, ln, pooled) = _forward(model, frames, training, rng)
    logp = log_softmax(logits)
    loss = float(-(labels * logp).sum() / bsz)

    grads = {}
    dlogits = (np.exp(logp) * labels.sum(axis=1, keepdims=True) - labels) / bsz
    grads["head.weight"] = pooled.T @ dlogits
    grads["head.bias"] = dlogits.sum(axis=0)
    dpooled = dlogits @ P["head.weight"].T
    df = np.broadcast_to(dpooled[:, None, :] / n, (bsz, n, cfg.feature_dim))
    dx, grads["norm.gain"], grads["norm.bias"] = layer_norm_backward(df, P["norm.gain"], ln)
    for b in reversed(range(cfg.num_blocks)):
        dx, g = stpool_block_backward(dx, P, f"block{b}", block_caches[b])
        grads.update(g)
    grads.update(_extract_backward(model, ext_cache, dx))
    return loss, {name: grads[name] for name, _ in parameter_shapes(cfg)}


# ---------------------------------------------------------------- optimiser


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params, **kw):
        return cls({k: np.zeros_like(v) for k, v in params.items()}, {k: np.zeros_like(v) for k, v in params.items()}, **kw)


def adam_step(model: StPoolModel, grads, state: AdamState, lr: float):
    """Bias-corrected Adam update, applied in place; returns (model, state)."""
    if set(grads) != set(model.params) or set(state.m) != set(model.params):
        raise ShapeMismatchError("gradient/state keys do not match the model parameters")
    state.t += 1
    c1 = 1.0 - state.beta1**state.t
    c2 = 1.0 - state.beta2**state.t
    for name, p in model.params.items():
        g = grads[name]
        if g.shape != p.shape or state.m[name].shape != p.shape:
            raise ShapeMismatchError(f"{name}: gradient {g.shape} vs parameter {p.shape}")
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return model, state


# ---------------------------------------------------------------- checkpoints

CKPT_MAGIC = b"STPM"
CKPT_VERSION = 1
# stage, c1, n_frames, h, w, num_blocks, pool_kernel, mlp_ratio, num_classes,
# layerscale_init, drop_rate, shared_extractor, seed, mixer, precision
_CFG = struct.Struct("<IIIIIIIdIddBqBB")
_MIXERS = ("stpool", "none")
_PRECISIONS = ("float64", "float32")


def _pack_config(cfg: ModelConfig) -> bytes:
    return _CFG.pack(
        cfg.stage,
        cfg.c1,
        cfg.n_frames,
        cfg.h,
        cfg.w,
        cfg.num_blocks,
        cfg.pool_kernel,
        cfg.mlp_ratio,
        cfg.num_classes,
        cfg.layerscale_init,
        cfg.drop_rate,
        int(cfg.shared_extractor),
        cfg.seed,
        _MIXERS.index(cfg.mixer),
        _PRECISIONS.index(cfg.precision),
    )


def _unpack_config(data: bytes, offset: int) -> ModelConfig:
    v = _CFG.unpack_from(data, offset)
    names = [f.name for f in fields(ModelConfig)]
    values = list(v[:11]) + [bool(v[11]), v[12], _MIXERS[v[13]], _PRECISIONS[v[14]]]
    return ModelConfig(**dict(zip(names, values)))


def encode_checkpoint(model: StPoolModel) -> bytes:
    out = bytearray(CKPT_MAGIC + struct.pack("<H", CKPT_VERSION))
    out += _pack_config(model.cfg)
    shapes = parameter_shapes(model.cfg)
    out += struct.pack("<I", len(shapes))
    for name, _ in shapes:
        arr = model.params[name]
        out += struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
        out += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    return bytes(out)


def decode_checkpoint(data: bytes, expected: ModelConfig | None = None) -> StPoolModel:
    if len(data) < 6 or data[:4] != CKPT_MAGIC:
        raise BadMagicError("not an STPM checkpoint (bad magic or truncated)")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != CKPT_VERSION:
        raise VersionMismatchError(f"checkpoint version {version}, expected {CKPT_VERSION}")
    pos = 6
    try:
        cfg = _unpack_config(data, pos)
        pos += _CFG.size
        (count,) = struct.unpack_from("<I", data, pos)
        pos += 4
        shapes = parameter_shapes(cfg)
        if count != len(shapes):
            raise ShapeMismatchError(f"checkpoint holds {count} tensors, config implies {len(shapes)}")
        params = {}
        for name, shape in shapes:
            (rank,) = struct.unpack_from("<B", data, pos)
            pos += 1
            dims = struct.unpack_from(f"<{rank}I", data, pos)
            pos += 4 * rank
            if tuple(dims) != tuple(shape):
                raise ShapeMismatchError(f"{name}: stored shape {dims}, config implies {shape}")
            size = int(np.prod(dims, dtype=np.int64))
            if pos + 8 * size > len(data):
                raise BadMagicError(f"checkpoint truncated inside tensor {name}")
            params[name] = np.frombuffer(data, dtype="<f8", count=size, offset=pos).reshape(dims).astype(cfg.dtype)
            pos += 8 * size
    except struct.error as exc:
        raise BadMagicError(f"checkpoint truncated: {exc}") from None
    if expected is not None:
        mismatched = [
            (name, a, b)
            for (name, a), (_, b) in zip(parameter_shapes(cfg), parameter_shapes(expected))
        ]
        if len(parameter_shapes(cfg)) != len(parameter_shapes(expected)) or any(a != b for _, a, b in mismatched):
            raise ShapeMismatchError("checkpoint parameters do not fit the requested configuration")
    return StPoolModel(cfg, params)


def save_checkpoint(model: StPoolModel, path) -> None:
    try:
        Path(path).write_bytes(encode_checkpoint(model))
    except OSError as exc:
        raise IoFailure(f"cannot write checkpoint {path}: {exc}") from exc


def load_checkpoint(path, expected: ModelConfig | None = None) -> StPoolModel:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read checkpoint {path}: {exc}") from exc
    return decode_checkpoint(data, expected)


def config_dict(cfg: ModelConfig) -> dict:
    return asdict(cfg)
