"""Central finite-difference checks for every layer and the end-to-end network."""
from __future__ import annotations

import numpy as np

from ..dsp import relative_error
from . import layers as L
from .cells import rnn_layer_backward, rnn_layer_forward
from .model import NetConfig, NetParams, init_params, loss_and_grads


def numeric_grad(f, arr, eps):
    """Central differences of scalar ``f()`` w.r.t. every entry of ``arr`` (perturbed in place)."""
    g = np.zeros_like(arr, dtype=np.float64)
    for i in np.ndindex(arr.shape):
        old = arr[i]
        arr[i] = old + eps
        fp = f()
        arr[i] = old - eps
        fm = f()
        arr[i] = old
        g[i] = (fp - fm) / (2 * eps)
    return g


def grad_check(p: NetParams, seqs, y, eps: float = 1e-5) -> dict:
    """Relative error per parameter group for the full CNN-RNN loss.

    Runs in float64 on a copy of ``p``. Returns ``{group: error}``; the
    overall figure is ``max(result.values())``.
    """
    q = p.astype(np.float64)
    seqs = np.asarray(seqs, dtype=np.float64)
    y = np.asarray(y)
    _, grads = loss_and_grads(q, seqs, y)
    f = lambda: loss_and_grads(q, seqs, y, conv_grads=False)[0]
    return {k: relative_error(grads[k], numeric_grad(f, q[k], eps)) for k in q.names()}


def tiny_config(cell: str, **kw) -> NetConfig:
    """Small network for finite-difference checks: 16x16 frames, 2 filters, 8-unit cells."""
    opts = dict(rnn_cell=cell, in_channels=3, n_classes=3, frame_size=16, conv_filters=(2, 2),
                rnn_units=8, dense_units=6, seq_len=3, dtype="float64")
    opts.update(kw)
    return NetConfig(**opts)


def tiny_problem(cell: str, seed: int = 0, batch: int = 2):
    cfg = tiny_config(cell, seed=seed)
    rng = np.random.default_rng(seed)
    p = init_params(cfg, rng)
    for k in p.names():
        if k.endswith(".b"):
            p[k] = p[k] + rng.uniform(-0.1, 0.1, p[k].shape)
    seqs = rng.standard_normal((batch, cfg.seq_len, cfg.in_channels, cfg.frame_size, cfg.frame_size))
    y = rng.integers(0, cfg.n_classes, batch)
    return p, seqs, y


def check_conv(rng, eps=1e-5) -> float:
    x = rng.standard_normal((2, 3, 7, 7))
    W = rng.standard_normal((4, 3, 4, 4))
    b = rng.standard_normal(4)
    R = rng.standard_normal((2, 4, 4, 4))
    f = lambda: float(np.sum(L.conv2d_forward(x, W, b)[0] * R))
    _, cache = L.conv2d_forward(x, W, b)
    dx, dW, db = L.conv2d_backward(R, cache)
    return max(relative_error(dx, numeric_grad(f, x, eps)), relative_error(dW, numeric_grad(f, W, eps)),
               relative_error(db, numeric_grad(f, b, eps)))


def check_pool(rng, eps=1e-5) -> float:
    # distinct values keep the arg-max stable under +-eps
    x = rng.permutation(2 * 2 * 9 * 9).reshape(2, 2, 9, 9) * 0.01
    R = rng.standard_normal((2, 2, 4, 4))
    f = lambda: float(np.sum(L.maxpool_forward(x)[0] * R))
    _, cache = L.maxpool_forward(x)
    return relative_error(L.maxpool_backward(R, cache), numeric_grad(f, x, eps))


def check_dense(rng, eps=1e-5) -> float:
    x = rng.standard_normal((3, 5))
    W = rng.standard_normal((4, 5))
    b = rng.standard_normal(4)
    R = rng.standard_normal((3, 4))
    f = lambda: float(np.sum(np.maximum(L.dense_forward(x, W, b)[0], 0) * R))
    z, cache = L.dense_forward(x, W, b)
    dx, dW, db = L.dense_backward(L.relu_backward(R, z), cache)
    return max(relative_error(dx, numeric_grad(f, x, eps)), relative_error(dW, numeric_grad(f, W, eps)),
               relative_error(db, numeric_grad(f, b, eps)))


def check_softmax_ce(rng, eps=1e-5) -> float:
    z = rng.standard_normal((4, 5))
    y = rng.integers(0, 5, 4)
    _, d, _ = L.softmax_cross_entropy(z, y)
    f = lambda: L.softmax_cross_entropy(z, y)[0]
    return relative_error(d, numeric_grad(f, z, eps))


def check_cell(cell: str, rng, eps=1e-5) -> float:
    G = 4 if cell == "lstm" else 3
    H, D, B, T = 5, 4, 3, 4
    W = rng.standard_normal((G * H, D)) * 0.5
    U = rng.standard_normal((G * H, H)) * 0.5
    b = rng.standard_normal(G * H) * 0.5
    xs = rng.standard_normal((B, T, D))
    R = rng.standard_normal((B, T, H))
    f = lambda: float(np.sum(rnn_layer_forward(cell, W, U, b, xs)[0] * R))
    _, caches = rnn_layer_forward(cell, W, U, b, xs)
    dxs, dW, dU, db = rnn_layer_backward(cell, W, U, R, caches)
    return max(relative_error(a, numeric_grad(f, t, eps))
               for a, t in ((dxs, xs), (dW, W), (dU, U), (db, b)))


def layer_checks(seed: int = 0, eps: float = 1e-5) -> dict:
    """Relative errors for each building block in isolation."""
    rng = np.random.default_rng(seed)
    return {
        "conv": check_conv(rng, eps),
        "pool": check_pool(rng, eps),
        "dense": check_dense(rng, eps),
        "softmax_ce": check_softmax_ce(rng, eps),
        "lstm": check_cell("lstm", rng, eps),
        "gru": check_cell("gru", rng, eps),
    }
