import numpy as np
import pytest
from sklearn.base import clone

from eegvideo import dsp, imaging
from eegvideo.pipeline import (BandpassFilter, DaeDenoiser, EegVideoEncoder, EegVideoNet, make_cnn_rnn,
                               make_csp_lda)


@pytest.fixture(scope="module")
def encoder(layout22):
    return EegVideoEncoder(layout22, 250.0).fit()


class TestTransformers:
    def test_bandpass_shape(self, small_rec):
        Y = BandpassFilter(250.0).fit_transform(small_rec.X[:3])
        assert Y.shape == (3, 22, 500)
        np.testing.assert_allclose(Y[1], dsp.butter_bandpass(dsp.BandpassSpec(0.5, 50.0), 250.0,
                                                             small_rec.X[1].astype(np.float64)))

    def test_dae_shape_and_determinism(self, small_rec):
        a = DaeDenoiser(seed=3, epochs=2).fit(small_rec.X)
        b = DaeDenoiser(seed=3, epochs=2).fit(small_rec.X)
        assert a.params_ == b.params_
        assert a.transform(small_rec.X[:2]).shape == (2, 22, 500)
        assert a.params_.n_hidden == 11

    def test_dae_channel_check(self, small_rec):
        d = DaeDenoiser(epochs=1).fit(small_rec.X)
        with pytest.raises(ValueError):
            d.transform(small_rec.X[:, :21])

    def test_clone(self, layout22):
        for est in (make_cnn_rnn(layout22, 250.0, cell="gru", epochs_rnn=3), make_csp_lda(250.0)):
            c = clone(est)
            assert c.get_params(deep=True).keys() == est.get_params(deep=True).keys()
        assert clone(EegVideoNet(layout22, cell="gru")).cell == "gru"


class TestEncoder:
    def test_sequence_shape(self, encoder, small_rec):
        seqs = encoder.transform(small_rec.X[:2].astype(np.float64))
        assert seqs.shape == (2, 12, 7, 32, 32)
        flows = seqs[:, :, 5:]
        assert flows.min() >= 0 and flows.max() <= 1

    def test_compress_commutes(self, encoder, small_rec):
        x = small_rec.X[0].astype(np.float64)
        bands = dsp.filterbank_arrays(x[None], 250.0)
        seqs = encoder.transform(x[None])
        proj = imaging.aep_project(small_rec.layout)
        for j, name in enumerate(dsp.BAND_NAMES):
            ref = imaging.compress_video(imaging.make_video(bands[name][0], proj)).frames
            np.testing.assert_allclose(seqs[0, :, j], ref, atol=1e-9)

    def test_full_frames(self, encoder, small_rec):
        X = small_rec.X[:2].astype(np.float64)
        frames, owner = encoder.full_frames(X, 24)
        assert frames.shape == (48, 7, 32, 32)
        np.testing.assert_array_equal(owner, np.repeat([0, 1], 24))
        bands = dsp.filterbank_arrays(X, 250.0)
        proj = imaging.aep_project(small_rec.layout)
        np.testing.assert_allclose(frames[0, 0], imaging.rasterize(proj, bands["alpha"][0][:, 0]), atol=1e-9)
