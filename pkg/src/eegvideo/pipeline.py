"""scikit-learn estimators wiring the stages together.

All estimators take trials as ``(n_trials, n_channels, n_samples)`` arrays.
Typical use::

    clf = make_cnn_rnn(layout, sample_rate=250, cell="gru")
    clf.fit(X_train, y_train).score(X_test, y_test)
"""
from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.pipeline import Pipeline
from sklearn.utils.validation import check_is_fitted

from . import dsp, imaging
from ._validation import check_labels, check_trials
from .baseline import CSP, LDA
from .flow import DEFAULT_MAX_MAG, FlowConfig, flow_planes
from .net import NetConfig, predict_proba, train_two_step


class BandpassFilter(TransformerMixin, BaseEstimator):
    """Zero-phase Butterworth bandpass (stateless)."""

    def __init__(self, sample_rate=250.0, low_hz=dsp.PREPROCESS_BAND[0], high_hz=dsp.PREPROCESS_BAND[1],
                 order=dsp.DEFAULT_ORDER):
        self.sample_rate = sample_rate
        self.low_hz = low_hz
        self.high_hz = high_hz
        self.order = order

    def fit(self, X, y=None):
        dsp.BandpassSpec(self.low_hz, self.high_hz, self.order).validate(self.sample_rate)
        self.n_features_in_ = check_trials(X).shape[1]
        return self

    def transform(self, X):
        X = check_trials(X)
        return dsp.butter_bandpass(dsp.BandpassSpec(self.low_hz, self.high_hz, self.order), self.sample_rate, X)


class DaeDenoiser(TransformerMixin, BaseEstimator):
    """Per-timepoint spatial denoising autoencoder.

    Channels are standardised with training statistics, so the corruption
    std ``noise_ratio`` is relative to each channel's std. Channels with a
    std below ``min_std`` (input units) are left unscaled so that numerical
    residue is not blown up to unit variance. ``hidden=None`` uses
    ``ceil(n_channels / 2)`` units. At most ``max_vectors`` randomly chosen
    time points are used for training.
    """

    def __init__(self, hidden=None, noise_ratio=0.1, epochs=10, lr=0.01, batch_size=64,
                 max_vectors=20000, min_std=1e-6, seed=0):
        self.hidden = hidden
        self.noise_ratio = noise_ratio
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.max_vectors = max_vectors
        self.min_std = min_std
        self.seed = seed

    def fit(self, X, y=None):
        X = check_trials(X)
        C = X.shape[1]
        vecs = X.transpose(0, 2, 1).reshape(-1, C)
        self.mean_ = vecs.mean(axis=0)
        self.scale_ = vecs.std(axis=0)
        self.scale_[self.scale_ < self.min_std] = 1.0
        rng = np.random.default_rng(self.seed)
        if self.max_vectors and len(vecs) > self.max_vectors:
            vecs = vecs[np.sort(rng.choice(len(vecs), self.max_vectors, replace=False))]
        hidden = self.hidden or math.ceil(C / 2)
        self.params_, self.history_ = dsp.dae_train(
            (vecs - self.mean_) / self.scale_, hidden, self.noise_ratio, self.epochs, self.lr, self.seed,
            batch_size=self.batch_size, return_history=True)
        self.n_features_in_ = C
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        X = check_trials(X, self.n_features_in_)
        vecs = (X.transpose(0, 2, 1) - self.mean_) / self.scale_
        out = dsp.dae_apply(self.params_, vecs) * self.scale_ + self.mean_
        return out.transpose(0, 2, 1)


class EegVideoEncoder(TransformerMixin, BaseEstimator):
    """Turn preprocessed trials into 12-step multichannel image sequences.

    Each step stacks the five rhythm-band frames (alpha, beta, gamma, delta,
    theta) and two optical-flow planes (magnitude, direction) computed on the
    broadband video, giving ``(n_trials, 12, 7, S, S)``.
    """

    def __init__(self, layout=None, sample_rate=250.0, frame_size=imaging.FRAME_SIZE,
                 filter_order=dsp.DEFAULT_ORDER, flow_sigma=1.5, flow_window=4, flow_iterations=3,
                 max_mag=DEFAULT_MAX_MAG):
        self.layout = layout
        self.sample_rate = sample_rate
        self.frame_size = frame_size
        self.filter_order = filter_order
        self.flow_sigma = flow_sigma
        self.flow_window = flow_window
        self.flow_iterations = flow_iterations
        self.max_mag = max_mag

    def fit(self, X=None, y=None):
        if self.layout is None:
            raise ValueError("an ElectrodeLayout is required")
        self.projection_ = imaging.aep_project(self.layout)
        self.weights_ = imaging.idw_weights(self.projection_, self.frame_size)
        return self

    @property
    def _flow_cfg(self):
        return FlowConfig(self.flow_sigma, self.flow_window, self.flow_iterations)

    def _bands(self, X):
        return dsp.filterbank_arrays(X, self.sample_rate, self.filter_order)

    def _frames(self, signals):
        """Rasterise ``(..., C, T)`` channel signals to ``(..., T, S, S)``."""
        S = self.frame_size
        out = np.einsum("pc,...ct->...tp", self.weights_, signals)
        return out.reshape(out.shape[:-1] + (S, S))

    def _compressed(self, X):
        # averaging commutes with the (linear) rasterisation, so compress first
        return imaging.compress_frames(np.moveaxis(X, -1, 0)).transpose(1, 2, 0)   # (n, C, 12)

    def flow_planes(self, X):
        """``(n_trials, 12, 2, S, S)`` flow planes of the broadband video."""
        check_is_fitted(self, "weights_")
        X = check_trials(X, len(self.layout))
        vids = self._frames(self._compressed(X))
        return np.stack([flow_planes(v, self._flow_cfg, self.max_mag) for v in vids])

    def transform(self, X, flows=None):
        check_is_fitted(self, "weights_")
        X = check_trials(X, len(self.layout))
        bands = self._bands(X)
        band_vids = np.stack([self._frames(self._compressed(bands[b])) for b in dsp.BAND_NAMES], axis=2)
        flows = self.flow_planes(X) if flows is None else flows
        return np.concatenate([band_vids, flows], axis=2)

    def full_frames(self, X, per_trial, flows=None):
        """Individual frames at ``per_trial`` evenly spaced time points per trial.

        Returns ``(frames (n * per_trial, 7, S, S), trial_index)``. The flow
        planes of a frame are those of the segment the frame falls in.
        """
        check_is_fitted(self, "weights_")
        X = check_trials(X, len(self.layout))
        T = X.shape[2]
        per_trial = min(per_trial, T) if per_trial else T
        t_idx = np.unique(np.linspace(0, T - 1, per_trial).round().astype(int))
        bands = self._bands(X)
        band_frames = np.stack([self._frames(bands[b][:, :, t_idx]) for b in dsp.BAND_NAMES], axis=2)
        flows = self.flow_planes(X) if flows is None else flows
        seg = imaging.segment_index(T)[t_idx]
        frames = np.concatenate([band_frames, flows[:, seg]], axis=2)
        n = X.shape[0]
        return frames.reshape((n * len(t_idx),) + frames.shape[2:]), np.repeat(np.arange(n), len(t_idx))


class EegVideoNet(ClassifierMixin, BaseEstimator):
    """CNN-RNN classifier on EEG videos and optical flow, trained in two steps.

    Expects preprocessed (bandpassed, denoised) trials. Band channels are
    divided by their training RMS (separately for single frames and for
    12-step averages); flow planes are already in ``[0, 1]``.
    """

    def __init__(self, layout=None, sample_rate=250.0, cell="lstm", seed=0, frames_per_trial=48,
                 epochs_cnn=4, epochs_rnn=30, lr_cnn=0.01, lr_rnn=0.01, batch=32, rnn_units=128,
                 dense_units=64, conv_filters=(16, 32), frame_size=imaging.FRAME_SIZE):
        self.layout = layout
        self.sample_rate = sample_rate
        self.cell = cell
        self.seed = seed
        self.frames_per_trial = frames_per_trial
        self.epochs_cnn = epochs_cnn
        self.epochs_rnn = epochs_rnn
        self.lr_cnn = lr_cnn
        self.lr_rnn = lr_rnn
        self.batch = batch
        self.rnn_units = rnn_units
        self.dense_units = dense_units
        self.conv_filters = conv_filters
        self.frame_size = frame_size

    def _config(self, n_classes):
        return NetConfig(rnn_cell=self.cell, in_channels=len(dsp.BAND_NAMES) + 2, n_classes=n_classes,
                         frame_size=self.frame_size, conv_filters=tuple(self.conv_filters),
                         rnn_units=self.rnn_units, dense_units=self.dense_units, seed=self.seed,
                         lr_cnn=self.lr_cnn, lr_rnn=self.lr_rnn, epochs_cnn=self.epochs_cnn,
                         epochs_rnn=self.epochs_rnn, batch=self.batch)

    @staticmethod
    def _band_rms(a):
        """RMS of each band channel; the channel axis is third from last."""
        bands = a[..., :5, :, :]
        axes = tuple(i for i in range(a.ndim) if i != a.ndim - 3)
        rms = np.sqrt(np.mean(np.square(bands, dtype=np.float64), axis=axes))
        rms[rms == 0] = 1.0
        return rms

    @staticmethod
    def _scale(a, rms):
        a = a.astype(np.float32)
        a[..., :5, :, :] /= rms[:, None, None].astype(np.float32)
        return a

    def fit(self, X, y):
        X = check_trials(X)
        y = check_labels(y, len(X))
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        self.encoder_ = EegVideoEncoder(self.layout, self.sample_rate, self.frame_size).fit()
        flows = self.encoder_.flow_planes(X)
        seqs = self.encoder_.transform(X, flows)
        frames, owner = self.encoder_.full_frames(X, self.frames_per_trial, flows)
        self.frame_rms_ = self._band_rms(frames)
        self.seq_rms_ = self._band_rms(seqs)
        cfg = self._config(len(self.classes_))
        self.params_, self.training_log_ = train_two_step(
            self._scale(seqs, self.seq_rms_), y_idx, self._scale(frames, self.frame_rms_), y_idx[owner], cfg)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        seqs = self._scale(self.encoder_.transform(check_trials(X)), self.seq_rms_)
        return predict_proba(self.params_, seqs)

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]


def make_cnn_rnn(layout, sample_rate, cell="lstm", seed=0, denoise=True, **net_params) -> Pipeline:
    """Bandpass -> DAE -> EEG videos + flow -> CNN-RNN."""
    steps = [("bandpass", BandpassFilter(sample_rate))]
    if denoise:
        steps.append(("dae", DaeDenoiser(seed=seed)))
    steps.append(("net", EegVideoNet(layout, sample_rate, cell=cell, seed=seed, **net_params)))
    return Pipeline(steps)


def make_csp_lda(sample_rate, m=2, seed=0, denoise=True) -> Pipeline:
    """Bandpass -> DAE -> one-vs-rest CSP -> LDA."""
    steps = [("bandpass", BandpassFilter(sample_rate))]
    if denoise:
        steps.append(("dae", DaeDenoiser(seed=seed)))
    steps += [("csp", CSP(m)), ("lda", LDA())]
    return Pipeline(steps)
