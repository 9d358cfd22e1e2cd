"""Signal conditioning: zero-phase Butterworth filtering, rhythm filterbank, denoising autoencoder."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .eegio import Recording, from_arrays

DEFAULT_ORDER = 4
PREPROCESS_BAND = (0.5, 50.0)


@dataclass(frozen=True)
class BandpassSpec:
    low_hz: float
    high_hz: float
    order: int = DEFAULT_ORDER

    def validate(self, sample_rate: float) -> None:
        if self.order < 1:
            raise ValueError("filter order must be a positive integer")
        if not 0 < self.low_hz < self.high_hz:
            raise ValueError("need 0 < low_hz < high_hz, got (%g, %g)" % (self.low_hz, self.high_hz))
        if self.high_hz >= sample_rate / 2:
            raise ValueError("cutoff %g Hz is at or above Nyquist (%g Hz)" % (self.high_hz, sample_rate / 2))


@dataclass(frozen=True)
class RhythmBand:
    name: str
    low_hz: float
    high_hz: float


RHYTHM_BANDS = (
    RhythmBand("alpha", 8.0, 13.0),
    RhythmBand("beta", 14.0, 30.0),
    RhythmBand("gamma", 31.0, 51.0),
    RhythmBand("delta", 0.5, 3.0),
    RhythmBand("theta", 4.0, 7.0),
)
BAND_NAMES = tuple(b.name for b in RHYTHM_BANDS)


def band_by_name(name: str) -> RhythmBand:
    for b in RHYTHM_BANDS:
        if b.name == name:
            return b
    raise ValueError("unknown band %r (expected one of %s)" % (name, ", ".join(BAND_NAMES)))


def bandpass_sos(spec: BandpassSpec, sample_rate: float) -> np.ndarray:
    """Second-order sections of the digital (bilinear) Butterworth bandpass."""
    spec.validate(sample_rate)
    return signal.butter(spec.order, [spec.low_hz, spec.high_hz], btype="bandpass",
                         output="sos", fs=sample_rate)


def butter_bandpass(spec: BandpassSpec, sample_rate: float, x) -> np.ndarray:
    """Zero-phase (forward-backward) Butterworth bandpass along the last axis.

    The signal is extended by odd reflection of ``3 * order`` samples at both
    ends before filtering. Output has the same shape as ``x`` (float64).
    """
    sos = bandpass_sos(spec, sample_rate)
    x = np.asarray(x, dtype=np.float64)
    padlen = 3 * spec.order
    if x.shape[-1] <= padlen:
        raise ValueError("signal too short: need more than %d samples, got %d" % (padlen, x.shape[-1]))
    return signal.sosfiltfilt(sos, x, axis=-1, padtype="odd", padlen=padlen)


def analytic_gain(spec: BandpassSpec, sample_rate: float, freq) -> np.ndarray:
    """Magnitude response of the forward-backward filter, ``|H(f)|**2``.

    Closed form of the bilinear-transformed Butterworth bandpass with
    pre-warped edges; independent of the filter coefficients.
    """
    warp = lambda f: np.tan(np.pi * np.asarray(f, dtype=np.float64) / sample_rate)
    wl, wh, w = warp(spec.low_hz), warp(spec.high_hz), warp(freq)
    with np.errstate(divide="ignore"):
        ratio = (w ** 2 - wl * wh) / (w * (wh - wl))
    return 1.0 / (1.0 + ratio ** (2 * spec.order))


def preprocess_trials(X, sample_rate: float, order: int = DEFAULT_ORDER) -> np.ndarray:
    """Apply the 0.5-50 Hz zero-phase bandpass to a ``(..., time)`` array."""
    return butter_bandpass(BandpassSpec(*PREPROCESS_BAND, order), sample_rate, X)


def filterbank_arrays(X, sample_rate: float, order: int = DEFAULT_ORDER) -> dict:
    """Band-filter ``X`` (last axis is time) with each rhythm band.

    Returns a dict ``band name -> array`` in :data:`BAND_NAMES` order.
    """
    return {b.name: butter_bandpass(BandpassSpec(b.low_hz, b.high_hz, order), sample_rate, X)
            for b in RHYTHM_BANDS}


def filterbank(rec: Recording, order: int = DEFAULT_ORDER) -> dict:
    """Split a recording into the five rhythm-band recordings."""
    out = filterbank_arrays(rec.X, rec.sample_rate, order)
    return {name: from_arrays(X, rec.labels, rec.layout, rec.sample_rate) for name, X in out.items()}


# ---------------------------------------------------------------------------
# Denoising autoencoder (per-timepoint channel vectors, tanh hidden, tied weights)

@dataclass
class DaeParams:
    W_enc: np.ndarray   # (hidden, input)
    b_enc: np.ndarray   # (hidden,)
    b_dec: np.ndarray   # (input,)
    noise_sigma: np.ndarray
    W_dec_free: np.ndarray | None = None  # (input, hidden); None means tied

    @property
    def tied(self) -> bool:
        return self.W_dec_free is None

    @property
    def W_dec(self) -> np.ndarray:
        return self.W_enc.T if self.tied else self.W_dec_free

    @property
    def n_input(self) -> int:
        return self.W_enc.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.W_enc.shape[0]

    def copy(self) -> "DaeParams":
        return DaeParams(self.W_enc.copy(), self.b_enc.copy(), self.b_dec.copy(),
                         np.array(self.noise_sigma, copy=True),
                         None if self.tied else self.W_dec_free.copy())

    def __eq__(self, other):
        if not isinstance(other, DaeParams):
            return NotImplemented
        same_dec = (self.tied and other.tied) or (
            not self.tied and not other.tied and np.array_equal(self.W_dec_free, other.W_dec_free))
        return (same_dec and np.array_equal(self.W_enc, other.W_enc)
                and np.array_equal(self.b_enc, other.b_enc) and np.array_equal(self.b_dec, other.b_dec)
                and np.array_equal(self.noise_sigma, other.noise_sigma))


def _dae_forward(p: DaeParams, X):
    h = np.tanh(X @ p.W_enc.T + p.b_enc)
    return h, h @ p.W_dec.T + p.b_dec


def dae_apply(p: DaeParams, x) -> np.ndarray:
    """Reconstruct ``x`` (one vector or a ``(n, input)`` batch)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != p.n_input:
        raise ValueError("dimension mismatch: DAE expects %d inputs, got %d" % (p.n_input, x.shape[-1]))
    return _dae_forward(p, x)[1]


def dae_loss_and_grads(p: DaeParams, X_in, X_target):
    """Mean over the batch of ``||decode(encode(x_in)) - x_target||**2`` and its gradients."""
    n = X_in.shape[0]
    h, out = _dae_forward(p, X_in)
    err = out - X_target
    loss = float(np.sum(err ** 2) / n)
    d_out = 2.0 * err / n
    g_b_dec = d_out.sum(axis=0)
    g_W_dec = d_out.T @ h                       # (input, hidden)
    d_h = (d_out @ p.W_dec) * (1.0 - h ** 2)
    g_W_enc = d_h.T @ X_in                      # (hidden, input)
    g_b_enc = d_h.sum(axis=0)
    grads = {"b_enc": g_b_enc, "b_dec": g_b_dec}
    if p.tied:
        grads["W_enc"] = g_W_enc + g_W_dec.T
    else:
        grads["W_enc"] = g_W_enc
        grads["W_dec_free"] = g_W_dec
    return loss, grads


def dae_init(n_input: int, hidden: int, noise_sigma, rng, tied: bool = True) -> DaeParams:
    lim = 1.0 / math.sqrt(n_input)
    W = rng.uniform(-lim, lim, (hidden, n_input))
    W_dec = None if tied else rng.uniform(-1.0 / math.sqrt(hidden), 1.0 / math.sqrt(hidden), (n_input, hidden))
    sigma = np.broadcast_to(np.asarray(noise_sigma, dtype=np.float64), (n_input,)).copy()
    return DaeParams(W, np.zeros(hidden), np.zeros(n_input), sigma, W_dec)


def dae_train(clean, hidden: int, noise_sigma, epochs: int, lr: float, seed: int, *,
              batch_size: int = 64, momentum: float = 0.9, tied: bool = True,
              return_history: bool = False):
    """Fit a denoising autoencoder on clean channel vectors.

    Each mini-batch is corrupted with additive Gaussian noise of std
    ``noise_sigma`` (scalar or per-input) and the decoder is trained to
    reproduce the clean batch. Optimiser: mini-batch SGD with momentum.

    Returns
    -------
    params : DaeParams
    history : list of float, optional
        Full-training-set loss after each epoch (on corrupted inputs drawn
        with a fixed evaluation seed), returned when ``return_history``.
    """
    X = np.asarray(clean, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("empty training set")
    if not lr > 0:
        raise ValueError("learning rate must be positive")
    n, d = X.shape
    if not 1 <= hidden < d:
        raise ValueError("hidden size must satisfy 1 <= hidden < input dimension (%d), got %d" % (d, hidden))
    rng = np.random.default_rng(seed)
    p = dae_init(d, hidden, noise_sigma, rng, tied)
    names = ["W_enc", "b_enc", "b_dec"] + ([] if tied else ["W_dec_free"])
    vel = {k: np.zeros_like(getattr(p, k)) for k in names}
    eval_noise = np.random.default_rng(seed + 1).standard_normal(X.shape) * p.noise_sigma

    history = []
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            xb = X[idx]
            noisy = xb + rng.standard_normal(xb.shape) * p.noise_sigma
            _, grads = dae_loss_and_grads(p, noisy, xb)
            for k in names:
                vel[k] = momentum * vel[k] - lr * grads[k]
                setattr(p, k, getattr(p, k) + vel[k])
        history.append(dae_loss_and_grads(p, X + eval_noise, X)[0])
    if return_history:
        return p, history
    return p


def dae_grad_check(p: DaeParams, batch, eps: float = 1e-5, target=None) -> float:
    """Max relative error between analytic and central-difference gradients.

    The loss is the mean squared reconstruction error of ``target`` (defaults
    to ``batch``) from input ``batch``.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError("eps must lie in [1e-7, 1e-3]")
    X = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    T = X if target is None else np.atleast_2d(np.asarray(target, dtype=np.float64))
    q = p.copy()
    _, grads = dae_loss_and_grads(q, X, T)
    worst = 0.0
    for name, g in grads.items():
        arr = getattr(q, name)
        num = np.zeros_like(arr)
        for i in np.ndindex(arr.shape):
            old = arr[i]
            arr[i] = old + eps
            lp = dae_loss_and_grads(q, X, T)[0]
            arr[i] = old - eps
            lm = dae_loss_and_grads(q, X, T)[0]
            arr[i] = old
            num[i] = (lp - lm) / (2 * eps)
        worst = max(worst, relative_error(g, num))
    return worst


def relative_error(analytic, numeric, floor: float = 1e-12) -> float:
    """Norm-wise relative error ``||a - n|| / max(||a||, ||n||, floor)``."""
    a, b = np.ravel(analytic), np.ravel(numeric)
    denom = max(np.linalg.norm(a), np.linalg.norm(b), floor)
    return float(np.linalg.norm(a - b) / denom)
