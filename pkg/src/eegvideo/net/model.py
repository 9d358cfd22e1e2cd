"""CNN-RNN classifier: per-frame conv stack, two stacked recurrent layers, dense ReLU, softmax."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import layers as L
from .cells import N_GATES, check_cell, rnn_layer_backward, rnn_layer_forward

CONV_KERNEL = 4
POOL_KERNEL = 3
POOL_STRIDE = 2


@dataclass
class NetConfig:
    """Architecture and training hyper-parameters.

    Kernel sizes are fixed (4x4 convolution, 3x3/2 max pooling). Widths
    default to two 128-unit recurrent layers and a 64-unit dense layer;
    smaller values exist only for gradient checking.
    """

    rnn_cell: str = "lstm"
    in_channels: int = 7
    n_classes: int = 4
    frame_size: int = 32
    conv_filters: tuple = (16, 32)
    rnn_units: int = 128
    rnn_layers: int = 2
    dense_units: int = 64
    seq_len: int = 12
    seed: int = 0
    lr_cnn: float = 0.01
    lr_rnn: float = 0.01
    momentum: float = 0.9
    epochs_cnn: int = 4
    epochs_rnn: int = 30
    batch: int = 32
    clip_norm: float = 5.0
    dtype: str = "float32"

    def __post_init__(self):
        self.rnn_cell = check_cell(self.rnn_cell)
        self.conv_filters = tuple(int(f) for f in self.conv_filters)
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        if not self.conv_filters:
            raise ValueError("at least one conv block is required")
        self.spatial_sizes()

    def spatial_sizes(self) -> list:
        """Side length after every conv and pool stage, starting with the input."""
        sizes = [self.frame_size]
        s = self.frame_size
        for _ in self.conv_filters:
            s = s - CONV_KERNEL + 1
            sizes.append(s)
            s = L.pool_output_size(s, POOL_KERNEL, POOL_STRIDE) if s >= POOL_KERNEL else 0
            sizes.append(s)
            if s < 1:
                raise ValueError("frame_size %d too small for %d conv blocks"
                                 % (self.frame_size, len(self.conv_filters)))
        return sizes

    @property
    def feature_dim(self) -> int:
        s = self.spatial_sizes()[-1]
        return self.conv_filters[-1] * s * s

    def to_dict(self) -> dict:
        d = asdict(self)
        d["conv_filters"] = list(self.conv_filters)
        return d

    @classmethod
    def from_dict(cls, d) -> "NetConfig":
        return cls(**d)


@dataclass(eq=False)
class NetParams:
    """Named parameter tensors in declaration order."""

    config: NetConfig
    tensors: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.tensors[name]

    def __setitem__(self, name, value):
        self.tensors[name] = value

    def names(self, prefix: str = "") -> list:
        return [k for k in self.tensors if k.startswith(prefix)]

    def copy(self) -> "NetParams":
        return NetParams(NetConfig.from_dict(self.config.to_dict()),
                         {k: v.copy() for k, v in self.tensors.items()})

    def astype(self, dtype) -> "NetParams":
        q = self.copy()
        q.config.dtype = np.dtype(dtype).name
        q.tensors = {k: v.astype(dtype) for k, v in q.tensors.items()}
        return q

    def __eq__(self, other):
        if not isinstance(other, NetParams):
            return NotImplemented
        return (self.config == other.config and list(self.tensors) == list(other.tensors)
                and all(np.array_equal(self.tensors[k], other.tensors[k]) for k in self.tensors))

    __hash__ = None


def conv_names(cfg: NetConfig) -> list:
    return [f"conv{i}.{p}" for i in range(len(cfg.conv_filters)) for p in ("W", "b")]


def rnn_names(cfg: NetConfig) -> list:
    return [f"rnn{i}.{p}" for i in range(cfg.rnn_layers) for p in ("W", "U", "b")]


def head_names() -> list:
    return ["dense.W", "dense.b", "out.W", "out.b"]


def init_params(cfg: NetConfig, rng=None) -> NetParams:
    """Fan-in scaled uniform initialisation; LSTM forget-gate bias starts at 1."""
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    dt = np.dtype(cfg.dtype)
    t = {}
    c_in = cfg.in_channels
    for i, f in enumerate(cfg.conv_filters):
        fan_in = c_in * CONV_KERNEL * CONV_KERNEL
        lim = math.sqrt(6.0 / fan_in)
        t[f"conv{i}.W"] = rng.uniform(-lim, lim, (f, c_in, CONV_KERNEL, CONV_KERNEL)).astype(dt)
        t[f"conv{i}.b"] = np.zeros(f, dt)
        c_in = f
    d_in, H = cfg.feature_dim, cfg.rnn_units
    G = N_GATES[cfg.rnn_cell]
    for i in range(cfg.rnn_layers):
        lim = 1.0 / math.sqrt(H)
        t[f"rnn{i}.W"] = rng.uniform(-lim, lim, (G * H, d_in)).astype(dt)
        t[f"rnn{i}.U"] = rng.uniform(-lim, lim, (G * H, H)).astype(dt)
        b = np.zeros(G * H, dt)
        if cfg.rnn_cell == "lstm":
            b[H:2 * H] = 1.0
        t[f"rnn{i}.b"] = b
        d_in = H
    lim = math.sqrt(6.0 / H)
    t["dense.W"] = rng.uniform(-lim, lim, (cfg.dense_units, H)).astype(dt)
    t["dense.b"] = np.zeros(cfg.dense_units, dt)
    lim = math.sqrt(6.0 / (cfg.dense_units + cfg.n_classes))
    t["out.W"] = rng.uniform(-lim, lim, (cfg.n_classes, cfg.dense_units)).astype(dt)
    t["out.b"] = np.zeros(cfg.n_classes, dt)
    return NetParams(cfg, t)


def zero_params(cfg: NetConfig) -> NetParams:
    p = init_params(cfg, np.random.default_rng(0))
    for k in p.tensors:
        p.tensors[k] = np.zeros_like(p.tensors[k])
    return p


# ---------------------------------------------------------------------------
# CNN part

def _check_frames(p: NetParams, x):
    cfg = p.config
    if x.ndim != 4 or x.shape[1:] != (cfg.in_channels, cfg.frame_size, cfg.frame_size):
        raise ValueError("shape mismatch: expected (N, %d, %d, %d) frames, got %s"
                         % (cfg.in_channels, cfg.frame_size, cfg.frame_size, x.shape))


def cnn_forward_batch(p: NetParams, x, keep_cache: bool = False):
    """Feature vectors ``(N, feature_dim)`` for frames ``(N, C, S, S)``."""
    _check_frames(p, x)
    caches = []
    h = x
    for i in range(len(p.config.conv_filters)):
        h, cc = L.conv2d_forward(h, p[f"conv{i}.W"], p[f"conv{i}.b"])
        h, rc = L.relu_forward(h)
        h, pc = L.maxpool_forward(h, POOL_KERNEL, POOL_STRIDE)
        if keep_cache:
            caches.append((cc, rc, pc))
    feats = h.reshape(h.shape[0], -1)
    return (feats, (h.shape, caches)) if keep_cache else feats


def cnn_backward(p: NetParams, dfeats, cache, need_dx: bool = False):
    shape, caches = cache
    d = dfeats.reshape(shape)
    grads = {}
    for i in reversed(range(len(caches))):
        cc, rc, pc = caches[i]
        d = L.maxpool_backward(d, pc)
        d = L.relu_backward(d, rc)
        d, grads[f"conv{i}.W"], grads[f"conv{i}.b"] = L.conv2d_backward(d, cc, need_dx=i > 0 or need_dx)
    return grads, d


def cnn_forward(p: NetParams, x) -> np.ndarray:
    """Flattened final feature map for one ``(C, S, S)`` frame."""
    x = np.asarray(x, dtype=p[conv_names(p.config)[0]].dtype)
    if x.ndim != 3:
        raise ValueError("shape mismatch: expected a (C, S, S) frame, got %s" % (x.shape,))
    return cnn_forward_batch(p, x[None])[0]


def sequence_features(p: NetParams, seqs, chunk: int = 256):
    """CNN features for ``(B, T, C, S, S)`` sequences -> ``(B, T, feature_dim)``."""
    seqs = np.asarray(seqs)
    B, T = seqs.shape[:2]
    flat = seqs.reshape((B * T,) + seqs.shape[2:])
    out = [cnn_forward_batch(p, flat[i:i + chunk]) for i in range(0, B * T, chunk)]
    feats = np.concatenate(out) if out else np.zeros((0, p.config.feature_dim), seqs.dtype)
    return feats.reshape(B, T, -1)


# ---------------------------------------------------------------------------
# RNN part

def rnn_logits(p: NetParams, feats, keep_cache: bool = False):
    cfg = p.config
    if feats.ndim != 3 or feats.shape[2] != cfg.feature_dim:
        raise ValueError("shape mismatch: expected (B, T, %d) features, got %s" % (cfg.feature_dim, feats.shape))
    h = feats
    rcaches = []
    for i in range(cfg.rnn_layers):
        h, c = rnn_layer_forward(cfg.rnn_cell, p[f"rnn{i}.W"], p[f"rnn{i}.U"], p[f"rnn{i}.b"], h)
        rcaches.append(c)
    last = h[:, -1]
    z, dc = L.dense_forward(last, p["dense.W"], p["dense.b"])
    a, rc = L.relu_forward(z)
    logits, oc = L.dense_forward(a, p["out.W"], p["out.b"])
    if keep_cache:
        return logits, (h.shape, rcaches, dc, rc, oc)
    return logits


def rnn_backward(p: NetParams, dlogits, cache):
    cfg = p.config
    hshape, rcaches, dc, rc, oc = cache
    grads = {}
    da, grads["out.W"], grads["out.b"] = L.dense_backward(dlogits, oc)
    dz = L.relu_backward(da, rc)
    dlast, grads["dense.W"], grads["dense.b"] = L.dense_backward(dz, dc)
    dhs = np.zeros(hshape, dtype=dlogits.dtype)
    dhs[:, -1] = dlast
    for i in reversed(range(cfg.rnn_layers)):
        dhs, grads[f"rnn{i}.W"], grads[f"rnn{i}.U"], grads[f"rnn{i}.b"] = rnn_layer_backward(
            cfg.rnn_cell, p[f"rnn{i}.W"], p[f"rnn{i}.U"], dhs, rcaches[i])
    return grads, dhs


def rnn_forward(p: NetParams, feats) -> np.ndarray:
    """Class probabilities from one sequence ``(T, feature_dim)`` or a batch ``(B, T, feature_dim)``."""
    feats = np.asarray(feats)
    single = feats.ndim == 2
    if single:
        feats = feats[None]
    if feats.shape[1] != p.config.seq_len:
        raise ValueError("shape mismatch: expected %d time steps, got %d" % (p.config.seq_len, feats.shape[1]))
    probs = L.softmax(rnn_logits(p, feats))
    return probs[0] if single else probs


def predict_proba(p: NetParams, seqs) -> np.ndarray:
    seqs = np.asarray(seqs, dtype=p["out.W"].dtype)
    single = seqs.ndim == 4
    if single:
        seqs = seqs[None]
    probs = rnn_forward(p, sequence_features(p, seqs))
    return probs[0] if single else probs


def predict(p: NetParams, s) -> np.ndarray | int:
    """Arg-max class (lowest index on ties) for one sequence or a batch."""
    probs = predict_proba(p, s)
    return int(np.argmax(probs)) if probs.ndim == 1 else np.argmax(probs, axis=1)


def loss_and_grads(p: NetParams, seqs, y, conv_grads: bool = True):
    """Cross-entropy of the whole CNN-RNN on sequences ``(B, T, C, S, S)`` and all gradients."""
    seqs = np.asarray(seqs, dtype=p["out.W"].dtype)
    B, T = seqs.shape[:2]
    flat = seqs.reshape((B * T,) + seqs.shape[2:])
    feats, ccache = cnn_forward_batch(p, flat, keep_cache=True)
    logits, rcache = rnn_logits(p, feats.reshape(B, T, -1), keep_cache=True)
    loss, dlogits, _ = L.softmax_cross_entropy(logits, np.asarray(y))
    grads, dfeats = rnn_backward(p, dlogits, rcache)
    if conv_grads:
        cg, _ = cnn_backward(p, dfeats.reshape(B * T, -1), ccache)
        grads.update(cg)
    return loss, grads
