import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eegvideo import imaging
from eegvideo.imaging import ProjectedLayout

# round-half-up boundaries evaluated with exact fractions
BOUNDS_2000 = [0, 167, 333, 500, 667, 833, 1000, 1167, 1333, 1500, 1667, 1833, 2000]
BOUNDS_500 = [0, 42, 83, 125, 167, 208, 250, 292, 333, 375, 417, 458, 500]


def random_unit(rng, n):
    p = rng.standard_normal((n, 3))
    return p / np.linalg.norm(p, axis=1, keepdims=True)


class TestProjection:
    def test_vertex(self):
        np.testing.assert_allclose(imaging.aep_coordinates([0, 0, 1]), [0, 0], atol=0)

    def test_equator(self):
        np.testing.assert_allclose(imaging.aep_coordinates([1, 0, 0]), [math.pi / 2, 0], atol=1e-15)

    def test_equidistance(self):
        p = random_unit(np.random.default_rng(0), 1000)
        radius = np.linalg.norm(imaging.aep_coordinates(p), axis=1)
        assert np.max(np.abs(radius - np.arccos(np.clip(p[:, 2], -1, 1)))) <= 1e-9

    def test_azimuth_preserved(self, rng):
        p = random_unit(rng, 50)
        q = imaging.aep_coordinates(p)
        np.testing.assert_allclose(np.arctan2(q[:, 1], q[:, 0]), np.arctan2(p[:, 1], p[:, 0]), atol=1e-12)

    def test_square_contains_points(self, layout22):
        proj = imaging.aep_project(layout22)
        tight = np.max(np.ptp(proj.points, axis=0))
        assert proj.side == pytest.approx(1.05 * tight)
        lo = np.array(proj.origin)
        assert np.all(proj.points > lo) and np.all(proj.points < lo + proj.side)

    def test_row_zero_is_top(self, layout22):
        c = imaging.pixel_centers(imaging.aep_project(layout22), 8)
        assert c[0, 0, 1] > c[-1, 0, 1]
        assert c[0, 0, 0] < c[0, -1, 0]


class TestRasterize:
    def test_constant(self, layout22):
        proj = imaging.aep_project(layout22)
        np.testing.assert_allclose(imaging.rasterize(proj, np.full(22, 3.5)), 3.5, rtol=1e-14)

    def test_electrode_site_reproduced(self):
        # 5x5 grid on [-2, 2]^2: pixel (2, 2) is centred on the origin, where electrode 0 sits
        proj = ProjectedLayout(np.array([[0.0, 0.0], [1.2, 0.4], [-0.8, 1.6]]), (-2.0, -2.0), 4.0)
        frame = imaging.rasterize(proj, [7.0, -1.0, 2.0], size=5)
        assert frame[2, 2] == 7.0

    def test_equidistant_pair(self):
        proj = ProjectedLayout(np.array([[-1.0, 0.0], [1.0, 0.0]]), (-2.0, -2.0), 4.0)
        frame = imaging.rasterize(proj, [0.0, 1.0], size=5)
        # column 2 lies on x = 0, equidistant from both electrodes
        np.testing.assert_allclose(frame[:, 2], 0.5, rtol=1e-14)

    def test_idw_hand_value(self):
        proj = ProjectedLayout(np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, 3.0]]), (-2.0, -2.0), 4.0)
        frame = imaging.rasterize(proj, [0.0, 1.0, 5.0], size=5)
        # pixel (2, 3) centre is (0.8, 0.0); distances 1.8, 0.2, hypot(0.8, 3)
        d = np.array([1.8, 0.2, math.hypot(0.8, 3.0)])
        w = 1 / d ** 2
        assert frame[2, 3] == pytest.approx(w @ [0.0, 1.0, 5.0] / w.sum(), rel=1e-12)

    def test_length_mismatch(self, layout22):
        with pytest.raises(ValueError, match="length mismatch"):
            imaging.rasterize(imaging.aep_project(layout22), np.zeros(21))

    def test_weights_rows(self, layout22):
        W = imaging.idw_weights(imaging.aep_project(layout22))
        assert W.shape == (1024, 22)
        np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-12)
        assert np.all((W > 0).sum(axis=1) <= 4)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_convex_and_linear(self, layout22, seed):
        rng = np.random.default_rng(seed)
        proj = imaging.aep_project(layout22)
        v, w = rng.standard_normal((2, 22)) * 10
        a, b = rng.standard_normal(2)
        fv = imaging.rasterize(proj, v)
        assert fv.min() >= v.min() - 1e-12 and fv.max() <= v.max() + 1e-12
        np.testing.assert_allclose(imaging.rasterize(proj, a * v + b * w),
                                   a * fv + b * imaging.rasterize(proj, w), atol=1e-10)


class TestVideo:
    def test_shape_and_definition(self, layout22, rng):
        proj = imaging.aep_project(layout22)
        x = rng.standard_normal((22, 500))
        v = imaging.make_video(x, proj)
        assert len(v) == 500 and v.frames.shape == (500, 32, 32)
        np.testing.assert_allclose(v.frames[123], imaging.rasterize(proj, x[:, 123]), atol=1e-12)

    def test_constant_in_time(self, layout22, rng):
        proj = imaging.aep_project(layout22)
        x = np.repeat(rng.standard_normal((22, 1)), 30, axis=1)
        f = imaging.make_video(x, proj).frames
        assert np.all(f == f[0])

    def test_dimension_mismatch(self, layout22):
        with pytest.raises(ValueError, match="dimension mismatch"):
            imaging.make_video(np.zeros((21, 10)), imaging.aep_project(layout22))


class TestCompress:
    def test_bounds(self):
        assert imaging.segment_bounds(2000).tolist() == BOUNDS_2000
        assert imaging.segment_bounds(500).tolist() == BOUNDS_500
        lengths = np.diff(imaging.segment_bounds(2000))
        assert set(lengths.tolist()) <= {166, 167} and lengths.sum() == 2000

    def test_even_split(self, rng):
        frames = rng.standard_normal((24, 4, 4))
        out = imaging.compress_video(imaging.EegVideo(frames)).frames
        np.testing.assert_allclose(out, (frames[0::2] + frames[1::2]) / 2, atol=1e-15)

    def test_constant(self):
        out = imaging.compress_frames(np.full((37, 3, 3), 2.5))
        np.testing.assert_array_equal(out, np.full((12, 3, 3), 2.5))

    def test_too_few(self):
        with pytest.raises(ValueError):
            imaging.compress_frames(np.zeros((11, 2, 2)))

    def test_segment_index(self):
        idx = imaging.segment_index(2000)
        assert np.bincount(idx).tolist() == np.diff(BOUNDS_2000).tolist()

    @settings(max_examples=30, deadline=None)
    @given(n=st.integers(12, 400), seed=st.integers(0, 1000))
    def test_mass(self, n, seed):
        frames = np.random.default_rng(seed).standard_normal((n, 2, 2))
        out = imaging.compress_frames(frames)
        lengths = np.diff(imaging.segment_bounds(n))
        weighted = np.tensordot(lengths, out, axes=1) / n
        np.testing.assert_allclose(weighted, frames.mean(axis=0), atol=1e-9)
        if n % 12 == 0:
            assert out.mean() == pytest.approx(frames.mean(), abs=1e-9)


class TestPgm:
    def test_levels(self, tmp_path):
        f = np.array([[0.0, 1.0], [0.5, 2.0]])
        imaging.frame_to_pgm(f, 0.0, 1.0, tmp_path / "a.pgm")
        np.testing.assert_array_equal(imaging.read_pgm(tmp_path / "a.pgm"), [[0, 255], [128, 255]])

    def test_constant_lo_hi(self, tmp_path):
        imaging.frame_to_pgm(np.full((32, 32), -3.0), -3.0, 3.0, tmp_path / "lo.pgm")
        imaging.frame_to_pgm(np.full((32, 32), 3.0), -3.0, 3.0, tmp_path / "hi.pgm")
        assert not imaging.read_pgm(tmp_path / "lo.pgm").any()
        assert np.all(imaging.read_pgm(tmp_path / "hi.pgm") == 255)

    def test_header(self, tmp_path):
        imaging.frame_to_pgm(np.zeros((3, 5)), 0.0, 1.0, tmp_path / "h.pgm")
        assert (tmp_path / "h.pgm").read_bytes().startswith(b"P5\n5 3\n255\n")
