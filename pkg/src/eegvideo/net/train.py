"""Two-step training: CNN on individual frames, then the recurrent head on 12-frame sequences."""
from __future__ import annotations

import logging
import math
import time

import numpy as np

from . import layers as L
from .model import (NetConfig, NetParams, cnn_backward, cnn_forward_batch, conv_names, head_names,
                    init_params, rnn_backward, rnn_logits, rnn_names, sequence_features)

log = logging.getLogger(__name__)


class Momentum:
    """SGD with classical momentum, updating arrays in place."""

    def __init__(self, lr, momentum=0.9):
        self.lr = lr
        self.momentum = momentum
        self.vel = {}

    def step(self, params: dict, grads: dict):
        for k, g in grads.items():
            v = self.vel.get(k)
            v = -self.lr * g if v is None else self.momentum * v - self.lr * g
            self.vel[k] = v.astype(params[k].dtype, copy=False)
            params[k] += self.vel[k]


def clip_by_global_norm(grads: dict, max_norm: float) -> float:
    norm = math.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads.values()))
    if max_norm and norm > max_norm:
        scale = max_norm / norm
        for k in grads:
            grads[k] *= scale
    return norm


def _check_labels(y, n_classes, what):
    y = np.asarray(y, dtype=np.int64)
    if y.size == 0:
        raise ValueError("empty %s" % what)
    if y.min() < 0 or y.max() >= n_classes:
        raise ValueError("labels outside [0, %d) in %s" % (n_classes, what))
    missing = sorted(set(range(n_classes)) - set(y.tolist()))
    if missing:
        raise ValueError("class(es) %s absent from %s" % (missing, what))
    return y


def train_cnn_step(p: NetParams, frames, y, rng, log_rows):
    """Step 1: conv stack plus a temporary softmax head on single frames."""
    cfg = p.config
    dt = np.dtype(cfg.dtype)
    lim = math.sqrt(6.0 / (cfg.feature_dim + cfg.n_classes))
    head = {"W": rng.uniform(-lim, lim, (cfg.n_classes, cfg.feature_dim)).astype(dt),
            "b": np.zeros(cfg.n_classes, dt)}
    opt = Momentum(cfg.lr_cnn, cfg.momentum)
    n = len(y)
    for epoch in range(cfg.epochs_cnn):
        t0 = time.perf_counter()
        order = rng.permutation(n)
        tot_loss, correct = 0.0, 0
        for s in range(0, n, cfg.batch):
            idx = order[s:s + cfg.batch]
            xb = np.asarray(frames[idx], dtype=dt)
            feats, cache = cnn_forward_batch(p, xb, keep_cache=True)
            logits, hc = L.dense_forward(feats, head["W"], head["b"])
            loss, dlogits, probs = L.softmax_cross_entropy(logits, y[idx])
            dfeats, gW, gb = L.dense_backward(dlogits, hc)
            grads, _ = cnn_backward(p, dfeats, cache)
            grads["head.W"], grads["head.b"] = gW, gb
            store = dict(p.tensors)
            store["head.W"], store["head.b"] = head["W"], head["b"]
            opt.step(store, grads)
            tot_loss += loss * len(idx)
            correct += int(np.sum(probs.argmax(axis=1) == y[idx]))
        row = {"step": 1, "epoch": epoch + 1, "loss": tot_loss / n, "accuracy": correct / n,
               "seconds": time.perf_counter() - t0}
        log_rows.append(row)
        log.info("cnn epoch %d loss %.4f acc %.3f", row["epoch"], row["loss"], row["accuracy"])


def train_rnn_step(p: NetParams, feats, y, rng, log_rows):
    """Step 2: recurrent layers, dense and softmax on frozen CNN features."""
    cfg = p.config
    opt = Momentum(cfg.lr_rnn, cfg.momentum)
    trainable = rnn_names(cfg) + head_names()
    n = len(y)
    for epoch in range(cfg.epochs_rnn):
        t0 = time.perf_counter()
        order = rng.permutation(n)
        tot_loss, correct = 0.0, 0
        for s in range(0, n, cfg.batch):
            idx = order[s:s + cfg.batch]
            logits, cache = rnn_logits(p, feats[idx], keep_cache=True)
            loss, dlogits, probs = L.softmax_cross_entropy(logits, y[idx])
            grads, _ = rnn_backward(p, dlogits, cache)
            grads = {k: grads[k] for k in trainable}
            clip_by_global_norm(grads, cfg.clip_norm)
            opt.step(p.tensors, grads)
            tot_loss += loss * len(idx)
            correct += int(np.sum(probs.argmax(axis=1) == y[idx]))
        row = {"step": 2, "epoch": epoch + 1, "loss": tot_loss / n, "accuracy": correct / n,
               "seconds": time.perf_counter() - t0}
        log_rows.append(row)
        log.info("rnn epoch %d loss %.4f acc %.3f", row["epoch"], row["loss"], row["accuracy"])


def train_two_step(seqs, y, frames, frame_y, cfg: NetConfig, params: NetParams | None = None):
    """Train the CNN-RNN in two steps.

    Parameters
    ----------
    seqs : array, shape (B, T, C, S, S)
        Compressed training sequences.
    y : array of int, shape (B,)
    frames : array, shape (N, C, S, S)
        Individual fully-sampled frames used to pre-train the conv stack.
    frame_y : array of int, shape (N,)
        Trial label of every frame.
    cfg : NetConfig

    Returns
    -------
    params : NetParams
        Conv weights from step 1 (untouched by step 2) and recurrent/dense
        weights from step 2; the step-1 frame head is discarded.
    log : list of dict
        One row per epoch: ``step``, ``epoch``, ``loss``, ``accuracy``, ``seconds``.
    """
    y = _check_labels(y, cfg.n_classes, "sequence training set")
    frame_y = _check_labels(frame_y, cfg.n_classes, "frame training set")
    dt = np.dtype(cfg.dtype)
    seqs = np.asarray(seqs, dtype=dt)
    if seqs.ndim != 5 or seqs.shape[1] != cfg.seq_len:
        raise ValueError("sequences must have shape (B, %d, C, S, S)" % cfg.seq_len)
    if len(seqs) != len(y) or len(frames) != len(frame_y):
        raise ValueError("data/label length mismatch")
    rng = np.random.default_rng(cfg.seed)
    p = init_params(cfg, rng) if params is None else params.copy()
    rows = []
    train_cnn_step(p, frames, frame_y, rng, rows)
    frozen = {k: p[k].copy() for k in conv_names(cfg)}
    feats = sequence_features(p, seqs)
    train_rnn_step(p, feats, y, rng, rows)
    assert all(np.array_equal(frozen[k], p[k]) for k in frozen)
    return p, rows
