import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eegvideo import dsp
from eegvideo.eegio import from_arrays

FS = 1000.0


def butter_power_gain(f, fs, lo, hi, n=4):
    """|H|^2 of the bilinear-transformed Butterworth bandpass (oracle)."""
    w = math.tan(math.pi * f / fs)
    wl, wh = math.tan(math.pi * lo / fs), math.tan(math.pi * hi / fs)
    r = (w * w - wl * wh) / (w * (wh - wl))
    return 1.0 / (1.0 + r ** (2 * n))


# frozen from butter_power_gain above
GAIN_10HZ = 0.9999997447901586
GAIN_100HZ = 0.0029906040792050063


def tone_amplitude(y, f, fs, trim):
    """Least-squares sine amplitude on the central part of ``y``."""
    t = np.arange(len(y)) / fs
    sl = slice(trim, len(y) - trim)
    M = np.stack([np.sin(2 * np.pi * f * t[sl]), np.cos(2 * np.pi * f * t[sl])], axis=1)
    coef = np.linalg.lstsq(M, y[sl], rcond=None)[0]
    return float(np.hypot(*coef))


PRE = dsp.BandpassSpec(0.5, 50.0)


class TestBandpass:
    def test_oracle_frozen(self):
        assert butter_power_gain(10, FS, 0.5, 50) == pytest.approx(GAIN_10HZ, rel=1e-12)
        assert butter_power_gain(100, FS, 0.5, 50) == pytest.approx(GAIN_100HZ, rel=1e-12)

    def test_analytic_gain_matches_oracle(self):
        for f in (1.0, 10.0, 33.0, 100.0, 300.0):
            assert dsp.analytic_gain(PRE, FS, f) == pytest.approx(butter_power_gain(f, FS, 0.5, 50), rel=1e-9)

    def test_dc_removed(self):
        y = dsp.butter_bandpass(PRE, FS, np.full(2000, 3.0))
        assert np.sqrt(np.mean(y ** 2)) <= 1e-3 * 3.0

    def test_passband_10hz(self):
        t = np.arange(20000) / FS
        y = dsp.butter_bandpass(PRE, FS, np.sin(2 * np.pi * 10 * t))
        assert tone_amplitude(y, 10, FS, 4000) == pytest.approx(GAIN_10HZ, rel=0.02)

    def test_stopband_100hz(self):
        t = np.arange(20000) / FS
        y = dsp.butter_bandpass(PRE, FS, np.sin(2 * np.pi * 100 * t))
        amp = tone_amplitude(y, 100, FS, 4000)
        assert 20 * math.log10(amp) <= -40
        assert abs(20 * math.log10(amp / GAIN_100HZ)) <= 3.0

    def test_errors(self):
        with pytest.raises(ValueError, match="Nyquist"):
            dsp.butter_bandpass(dsp.BandpassSpec(0.5, 60.0), 100.0, np.zeros(1000))
        with pytest.raises(ValueError, match="too short"):
            dsp.butter_bandpass(PRE, FS, np.zeros(12))

    def test_channels_independent(self, rng):
        X = rng.standard_normal((3, 500))
        Y = dsp.butter_bandpass(PRE, FS, X)
        np.testing.assert_allclose(Y[1], dsp.butter_bandpass(PRE, FS, X[1]), atol=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 1000), a=st.floats(-5, 5), b=st.floats(-5, 5))
    def test_linearity(self, seed, a, b):
        rng = np.random.default_rng(seed)
        x, y = rng.standard_normal((2, 600))
        lhs = dsp.butter_bandpass(PRE, 250.0, a * x + b * y)
        rhs = a * dsp.butter_bandpass(PRE, 250.0, x) + b * dsp.butter_bandpass(PRE, 250.0, y)
        scale = max(np.abs(rhs).max(), 1e-12)
        assert np.abs(lhs - rhs).max() <= 1e-9 * scale + 1e-12

    @pytest.mark.parametrize("width", [5.0, 10.0, 20.0])
    def test_zero_phase(self, width):
        t = np.arange(2001)
        pulse = np.exp(-0.5 * ((t - 1000) / width) ** 2)
        y = dsp.butter_bandpass(dsp.BandpassSpec(1.0, 40.0), 250.0, pulse)
        assert abs(int(np.argmax(y)) - 1000) <= 1


class TestFilterbank:
    def test_band_table(self):
        assert dsp.BAND_NAMES == ("alpha", "beta", "gamma", "delta", "theta")
        edges = {b.name: (b.low_hz, b.high_hz) for b in dsp.RHYTHM_BANDS}
        assert edges == {"alpha": (8, 13), "beta": (14, 30), "gamma": (31, 51), "delta": (0.5, 3),
                         "theta": (4, 7)}

    def test_alpha_keeps_10hz(self, layout22):
        t = np.arange(5000) / 250.0
        X = np.tile(np.sin(2 * np.pi * 10 * t), (1, 22, 1))
        out = dsp.filterbank(from_arrays(X, [0], layout22, 250.0))
        assert set(out) == set(dsp.BAND_NAMES)
        sl = slice(1000, 4000)
        p_in = np.mean(X[0, 0, sl] ** 2)
        assert np.mean(out["alpha"].X[0, 0, sl] ** 2) >= 0.95 * p_in
        assert np.mean(out["delta"].X[0, 0, sl] ** 2) <= 0.01 * p_in

    def test_zero_signal(self):
        out = dsp.filterbank_arrays(np.zeros((2, 3, 400)), 250.0)
        assert len(out) == 5
        assert all(not np.any(v) for v in out.values())

    def test_gamma_needs_rate(self):
        with pytest.raises(ValueError, match="Nyquist"):
            dsp.filterbank_arrays(np.zeros((1, 3, 400)), 100.0)
        dsp.filterbank_arrays(np.zeros((1, 3, 400)), 103.0)

    @pytest.mark.parametrize("band", dsp.RHYTHM_BANDS, ids=lambda b: b.name)
    def test_band_separation(self, band):
        fs = 250.0
        t = np.arange(10000) / fs
        centre = (band.low_hz + band.high_hz) / 2
        out = dsp.filterbank_arrays(np.sin(2 * np.pi * centre * t)[None, None], fs)
        power = {k: np.mean(v[0, 0, 2000:-2000] ** 2) for k, v in out.items()}
        for other, p in power.items():
            if other != band.name:
                assert power[band.name] >= 10 * p


def _subspace_data(seed, n, dim=22, rank=2):
    rng = np.random.default_rng(seed)
    basis = np.linalg.qr(rng.standard_normal((dim, rank)))[0]
    return rng.standard_normal((n, rank)) @ basis.T, basis


class TestDae:
    def test_subspace_recovery(self):
        X, basis = _subspace_data(0, 2000)
        p = dsp.dae_train(X, 4, 0.05, 20, 0.01, 0)
        Xt = np.random.default_rng(5).standard_normal((500, 2)) @ basis.T
        # oracle: projecting onto the true subspace reproduces Xt exactly
        np.testing.assert_allclose(Xt @ basis @ basis.T, Xt, atol=1e-12)
        mse = np.mean(np.sum((dsp.dae_apply(p, Xt) - Xt) ** 2, axis=1))
        assert mse <= 0.1 * np.sum(Xt.var(axis=0))
        assert p.n_hidden < p.n_input

    def test_in_subspace_vector(self):
        X, basis = _subspace_data(0, 2000)
        p = dsp.dae_train(X, 4, 0.05, 20, 0.01, 0)
        x = np.array([0.7, -0.4]) @ basis.T
        assert np.sum((dsp.dae_apply(p, x) - x) ** 2) <= 0.1 * np.sum(X.var(axis=0))

    def test_history_decreases(self):
        X, _ = _subspace_data(1, 1000)
        _, hist = dsp.dae_train(X, 4, 0.05, 8, 0.01, 0, return_history=True)
        assert len(hist) == 8 and hist[-1] < hist[0]

    def test_deterministic(self):
        X, _ = _subspace_data(2, 300)
        assert dsp.dae_train(X, 3, 0.1, 3, 0.01, 9) == dsp.dae_train(X, 3, 0.1, 3, 0.01, 9)

    def test_errors(self):
        X, _ = _subspace_data(2, 50, dim=6)
        with pytest.raises(ValueError, match="hidden"):
            dsp.dae_train(X, 6, 0.0, 1, 0.01, 0)
        with pytest.raises(ValueError, match="empty"):
            dsp.dae_train(np.zeros((0, 6)), 3, 0.1, 1, 0.01, 0)
        with pytest.raises(ValueError, match="learning rate"):
            dsp.dae_train(X, 3, 0.1, 1, 0.0, 0)

    def test_apply_zero_params(self, rng):
        p = dsp.DaeParams(np.zeros((3, 6)), np.zeros(3), np.zeros(6), np.zeros(6))
        np.testing.assert_array_equal(dsp.dae_apply(p, rng.standard_normal((5, 6))), 0.0)
        with pytest.raises(ValueError, match="dimension mismatch"):
            dsp.dae_apply(p, np.zeros(5))

    @pytest.mark.parametrize("tied", [True, False])
    def test_grad_check(self, rng, tied):
        p = dsp.dae_init(6, 3, 0.1, rng, tied=tied)
        p.b_enc[:] = rng.standard_normal(3) * 0.1
        p.b_dec[:] = rng.standard_normal(6) * 0.1
        assert dsp.dae_grad_check(p, rng.standard_normal((4, 6))) <= 1e-4

    def test_grad_check_zero_batch(self, rng):
        p = dsp.dae_init(6, 3, 0.1, rng)
        p.b_enc[:] = rng.standard_normal(3)
        p.b_dec[:] = rng.standard_normal(6)
        Z = np.zeros((4, 6))
        _, g = dsp.dae_loss_and_grads(p, Z, Z)
        h = np.tanh(p.b_enc)
        out = p.W_enc.T @ h + p.b_dec
        # closed form for a zero batch: d/db_dec = 2 * out, d/db_enc = 2 * (1 - h^2) * (W out)
        np.testing.assert_allclose(g["b_dec"], 2 * out, rtol=1e-12)
        np.testing.assert_allclose(g["b_enc"], 2 * (1 - h ** 2) * (p.W_enc @ out), rtol=1e-12)
        assert dsp.dae_grad_check(p, Z) <= 1e-8

    def test_grad_check_eps_range(self, rng):
        p = dsp.dae_init(6, 3, 0.1, rng)
        with pytest.raises(ValueError, match="eps"):
            dsp.dae_grad_check(p, np.zeros((2, 6)), eps=1e-1)
