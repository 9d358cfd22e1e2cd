"""EEG images and videos: equidistant scalp projection, IDW rasterisation, 12-segment compression."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eegio import ElectrodeLayout

FRAME_SIZE = 32
N_SEGMENTS = 12
IDW_POWER = 2
IDW_NEIGHBOURS = 4
SQUARE_MARGIN = 0.05
COINCIDENT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ProjectedLayout:
    """2D electrode points plus the square mapping the plane to pixels.

    ``origin`` is the lower-left corner ``(x0, y0)`` of the bounding square.
    Row 0 of a frame is the top edge (largest y), column 0 the left edge.
    """

    points: np.ndarray
    origin: tuple
    side: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or not np.all(np.isfinite(pts)):
            raise ValueError("points must be a finite (n, 2) array")
        if not self.side > 0:
            raise ValueError("bounding square must have positive side length")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    def __len__(self):
        return self.points.shape[0]


def aep_coordinates(positions) -> np.ndarray:
    """Azimuthal equidistant projection around the vertex ``(0, 0, 1)``.

    A point at azimuth ``atan2(y, x)`` and elevation ``asin(z)`` maps to
    ``(pi/2 - elevation) * (cos azimuth, sin azimuth)``.
    """
    p = np.asarray(positions, dtype=np.float64)
    az = np.arctan2(p[..., 1], p[..., 0])
    elev = np.arcsin(np.clip(p[..., 2], -1.0, 1.0))
    rho = np.pi / 2 - elev
    return np.stack([rho * np.cos(az), rho * np.sin(az)], axis=-1)


def bounding_square(points, margin: float = SQUARE_MARGIN):
    """Tight square around ``points`` (centred on their bounding box), enlarged by ``margin``."""
    pts = np.asarray(points, dtype=np.float64)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    side = float(np.max(hi - lo)) * (1.0 + margin)
    if side <= 0:
        side = 1.0
    centre = (lo + hi) / 2
    return (centre[0] - side / 2, centre[1] - side / 2), side


def aep_project(layout: ElectrodeLayout) -> ProjectedLayout:
    pts = aep_coordinates(layout.positions)
    origin, side = bounding_square(pts)
    return ProjectedLayout(pts, origin, side)


def pixel_centers(proj: ProjectedLayout, size: int = FRAME_SIZE) -> np.ndarray:
    """Plane coordinates of pixel centres, shape ``(size, size, 2)``."""
    step = proj.side / size
    x = proj.origin[0] + (np.arange(size) + 0.5) * step
    y = proj.origin[1] + proj.side - (np.arange(size) + 0.5) * step
    xx, yy = np.meshgrid(x, y)
    return np.stack([xx, yy], axis=-1)


def idw_weights(proj: ProjectedLayout, size: int = FRAME_SIZE, k: int = IDW_NEIGHBOURS,
                power: float = IDW_POWER) -> np.ndarray:
    """Dense interpolation matrix ``(size*size, n_electrodes)``.

    Each row holds inverse-distance weights over the ``min(k, n)`` nearest
    electrodes and sums to one; a pixel within ``1e-9`` of an electrode gets
    weight one on that electrode.
    """
    pts = proj.points
    n = len(pts)
    k = min(k, n)
    centers = pixel_centers(proj, size).reshape(-1, 2)
    d = np.linalg.norm(centers[:, None, :] - pts[None, :, :], axis=-1)
    nearest = np.argsort(d, axis=1, kind="stable")[:, :k]
    W = np.zeros((centers.shape[0], n))
    rows = np.arange(centers.shape[0])
    dn = d[rows[:, None], nearest]
    hit = dn[:, 0] < COINCIDENT_TOL
    with np.errstate(divide="ignore"):
        w = 1.0 / dn ** power
    w[hit] = 0.0
    w[hit, 0] = 1.0
    w /= w.sum(axis=1, keepdims=True)
    W[rows[:, None], nearest] = w
    return W


def rasterize(proj: ProjectedLayout, values, size: int = FRAME_SIZE, weights=None) -> np.ndarray:
    """Interpolate per-electrode amplitudes onto a ``size x size`` frame."""
    v = np.asarray(values, dtype=np.float64)
    if v.shape[0] != len(proj):
        raise ValueError("length mismatch: %d values for %d electrodes" % (v.shape[0], len(proj)))
    W = idw_weights(proj, size) if weights is None else weights
    return (W @ v).reshape((size, size) + v.shape[1:])


@dataclass
class EegVideo:
    """Time-ordered frames ``(n_frames, H, W)`` of one trial in one band."""

    frames: np.ndarray
    band: str | None = None
    label: int | None = None

    def __post_init__(self):
        self.frames = np.asarray(self.frames)
        if self.frames.ndim != 3 or self.frames.shape[0] == 0:
            raise ValueError("a video needs a non-empty (n_frames, H, W) frame stack")

    def __len__(self):
        return self.frames.shape[0]


def make_frames(trial, proj: ProjectedLayout, size: int = FRAME_SIZE, weights=None) -> np.ndarray:
    """Frame stack ``(n_samples, size, size)`` for a ``(channels, samples)`` matrix."""
    x = np.asarray(trial, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != len(proj):
        raise ValueError("dimension mismatch: trial has %s, layout has %d channels" % (x.shape, len(proj)))
    W = idw_weights(proj, size) if weights is None else weights
    return (W @ x).T.reshape(x.shape[1], size, size)


def make_video(trial_band, proj: ProjectedLayout, band: str | None = None, label: int | None = None,
               size: int = FRAME_SIZE) -> EegVideo:
    """Fully sampled video: one frame per time sample."""
    return EegVideo(make_frames(trial_band, proj, size), band, label)


def segment_bounds(n_frames: int, n_segments: int = N_SEGMENTS) -> np.ndarray:
    """Boundaries ``round(i * T / n)`` (half rounds up) for ``i = 0..n``."""
    i = np.arange(n_segments + 1)
    return (2 * i * n_frames + n_segments) // (2 * n_segments)


def compress_frames(frames, n_segments: int = N_SEGMENTS) -> np.ndarray:
    """Average consecutive frames into ``n_segments`` segments along axis 0."""
    frames = np.asarray(frames)
    T = frames.shape[0]
    if T < n_segments:
        raise ValueError("need at least %d frames, got %d" % (n_segments, T))
    b = segment_bounds(T, n_segments)
    return np.stack([frames[b[i]:b[i + 1]].mean(axis=0) for i in range(n_segments)])


def compress_video(v: EegVideo) -> EegVideo:
    return EegVideo(compress_frames(v.frames), v.band, v.label)


def segment_index(n_frames: int, n_segments: int = N_SEGMENTS) -> np.ndarray:
    """Segment id of every source frame."""
    b = segment_bounds(n_frames, n_segments)
    return np.searchsorted(b, np.arange(n_frames), side="right") - 1


def frame_to_gray(frame, lo: float, hi: float) -> np.ndarray:
    """8-bit gray levels ``clamp(round_half_up(255 * (p - lo) / (hi - lo)))``."""
    if not lo < hi:
        raise ValueError("need lo < hi")
    scaled = 255.0 * (np.asarray(frame, dtype=np.float64) - lo) / (hi - lo)
    return np.clip(np.floor(scaled + 0.5), 0, 255).astype(np.uint8)


def frame_to_pgm(frame, lo: float, hi: float, path) -> None:
    """Write a frame as binary 8-bit PGM (P5)."""
    g = frame_to_gray(frame, lo, hi)
    h, w = g.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(g.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM written by :func:`frame_to_pgm`."""
    with open(path, "rb") as fh:
        magic, dims, maxval, raster = fh.read().split(b"\n", 3)
    if magic != b"P5" or maxval != b"255":
        raise ValueError("not an 8-bit binary PGM file")
    w, h = (int(t) for t in dims.split())
    return np.frombuffer(raster, dtype=np.uint8, count=w * h).reshape(h, w)
