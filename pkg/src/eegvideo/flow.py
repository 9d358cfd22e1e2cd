"""Dense two-frame optical flow by polynomial expansion, plus flow encodings.

Coordinates: ``x`` is the column index (rightwards), ``y`` the row index
(downwards). ``u`` and ``v`` are the x and y displacements in pixels/frame.
"""
from __future__ import annotations

import colorsys
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

DEFAULT_SIGMA = 1.5
DEFAULT_WINDOW = 4
DEFAULT_ITERATIONS = 3
DEFAULT_MAX_MAG = 2.0
FLAT_TOL = 1e-9


@dataclass
class PolyExpansion:
    """Per-pixel quadratic model ``f(p) ~ p^T A p + b^T p + c`` around each pixel."""

    A: np.ndarray  # (H, W, 2, 2), symmetric
    b: np.ndarray  # (H, W, 2)
    c: np.ndarray  # (H, W)


@dataclass
class FlowField:
    u: np.ndarray
    v: np.ndarray
    degenerate: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.degenerate is None:
            self.degenerate = np.zeros(self.u.shape, dtype=bool)

    @property
    def shape(self):
        return self.u.shape


@dataclass(frozen=True)
class FlowConfig:
    sigma: float = DEFAULT_SIGMA
    window: int = DEFAULT_WINDOW
    iterations: int = DEFAULT_ITERATIONS
    flat_tol: float = FLAT_TOL


# basis order: 1, x, y, x^2, y^2, xy
def _basis(radius: int):
    r = np.arange(-radius, radius + 1, dtype=np.float64)
    yy, xx = np.meshgrid(r, r, indexing="ij")
    return [np.ones_like(xx), xx, yy, xx ** 2, yy ** 2, xx * yy]


def poly_expand(f, sigma: float = DEFAULT_SIGMA, radius: int | None = None) -> PolyExpansion:
    """Weighted least-squares quadratic fit at every pixel.

    The neighbourhood is weighted by a Gaussian applicability of std
    ``sigma`` truncated at ``radius`` (default ``ceil(3 * sigma)``). Samples
    outside the frame carry zero certainty (normalised convolution), so a
    globally quadratic frame is reproduced exactly at every pixel.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    f = np.asarray(f, dtype=np.float64)
    if radius is None:
        radius = max(1, int(math.ceil(3 * sigma)))
    basis = _basis(radius)
    r = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-0.5 * (r / sigma) ** 2)
    app = np.outer(g, g)
    cert = np.ones_like(f)

    def corr(img, kern):
        return ndimage.correlate(img, kern, mode="constant", cval=0.0)

    n = len(basis)
    G = np.empty(f.shape + (n, n))
    for i in range(n):
        for j in range(i, n):
            G[..., i, j] = G[..., j, i] = corr(cert, app * basis[i] * basis[j])
    h = np.stack([corr(f * cert, app * bi) for bi in basis], axis=-1)
    r6 = np.linalg.solve(G, h[..., None])[..., 0]

    A = np.empty(f.shape + (2, 2))
    A[..., 0, 0] = r6[..., 3]
    A[..., 1, 1] = r6[..., 4]
    A[..., 0, 1] = A[..., 1, 0] = r6[..., 5] / 2
    return PolyExpansion(A, r6[..., 1:3].copy(), r6[..., 0].copy())


def _warp(arr, rows, cols):
    """Bilinear lookup of a (H, W, ...) field at fractional (rows, cols)."""
    flat = arr.reshape(arr.shape[:2] + (-1,))
    out = np.stack([ndimage.map_coordinates(flat[..., k], [rows, cols], order=1, mode="nearest")
                    for k in range(flat.shape[-1])], axis=-1)
    return out.reshape(arr.shape)


def estimate_flow(f1, f2, cfg: FlowConfig | None = None) -> FlowField:
    """Displacement field taking ``f1`` to ``f2``.

    Solves ``A d = delta_b`` per pixel with ``A = (A1 + A2) / 2`` and
    ``delta_b = -(b2 - b1) / 2``, in least squares over a square window of
    radius ``cfg.window``, refined by ``cfg.iterations`` passes that look up
    the second expansion at the current displacement estimate. Pixels whose
    aggregated 2x2 system is (near) singular get zero flow and are marked in
    ``FlowField.degenerate``; so does every pixel when both frames have a
    peak-to-peak range at or below ``cfg.flat_tol``.
    """
    cfg = cfg or FlowConfig()
    f1 = np.asarray(f1, dtype=np.float64)
    f2 = np.asarray(f2, dtype=np.float64)
    if f1.shape != f2.shape or f1.ndim != 2:
        raise ValueError("frames must be 2D and of the same shape")
    if max(np.ptp(f1), np.ptp(f2)) <= cfg.flat_tol:
        zero = np.zeros(f1.shape)
        return FlowField(zero, zero.copy(), np.ones(f1.shape, dtype=bool))
    p1 = poly_expand(f1, cfg.sigma)
    p2 = poly_expand(f2, cfg.sigma)
    H, W = f1.shape
    rows, cols = np.meshgrid(np.arange(H, dtype=np.float64), np.arange(W, dtype=np.float64), indexing="ij")
    d = np.zeros((H, W, 2))
    degenerate = np.zeros((H, W), dtype=bool)
    size = 2 * cfg.window + 1

    for _ in range(max(1, cfg.iterations)):
        if np.any(d):
            A2 = _warp(p2.A, rows + d[..., 1], cols + d[..., 0])
            b2 = _warp(p2.b, rows + d[..., 1], cols + d[..., 0])
        else:
            A2, b2 = p2.A, p2.b
        A = (p1.A + A2) / 2
        db = -0.5 * (b2 - p1.b) + np.einsum("...ij,...j->...i", A, d)
        G = np.einsum("...ki,...kj->...ij", A, A)
        h = np.einsum("...ki,...k->...i", A, db)
        G = ndimage.uniform_filter(G, size=(size, size, 1, 1), mode="constant") * size * size
        h = ndimage.uniform_filter(h, size=(size, size, 1), mode="constant") * size * size

        g11, g12, g22 = G[..., 0, 0], G[..., 0, 1], G[..., 1, 1]
        det = g11 * g22 - g12 * g12
        tr = g11 + g22
        scale = tr.max()
        degenerate = (tr <= 1e-12 * scale) | (det <= 1e-9 * tr ** 2) if scale > 0 else np.ones_like(tr, bool)
        safe = np.where(degenerate, 1.0, det)
        u = (g22 * h[..., 0] - g12 * h[..., 1]) / safe
        v = (g11 * h[..., 1] - g12 * h[..., 0]) / safe
        d = np.stack([np.where(degenerate, 0.0, u), np.where(degenerate, 0.0, v)], axis=-1)

    return FlowField(d[..., 0], d[..., 1], degenerate)


def brightness_residual(f1, f2, fl: FlowField) -> tuple[np.ndarray, np.ndarray]:
    """Linearised constancy residual ``fx*u + fy*v + ft`` and ``ft``.

    Spatial derivatives are central differences averaged over both frames;
    ``ft = f2 - f1`` (one frame step).
    """
    f1 = np.asarray(f1, dtype=np.float64)
    f2 = np.asarray(f2, dtype=np.float64)
    gy1, gx1 = np.gradient(f1)
    gy2, gx2 = np.gradient(f2)
    fx, fy, ft = (gx1 + gx2) / 2, (gy1 + gy2) / 2, f2 - f1
    return fx * fl.u + fy * fl.v + ft, ft


def video_flow(frames, cfg: FlowConfig | None = None) -> list:
    """Flow between every pair of consecutive frames (``len(frames) - 1`` fields)."""
    return [estimate_flow(frames[i], frames[i + 1], cfg) for i in range(len(frames) - 1)]


def flow_to_hsv_image(fl: FlowField, max_mag: float) -> np.ndarray:
    """RGB visualisation: direction -> hue, magnitude -> value, saturation 1.

    Hue is ``atan2(v, u)`` in degrees modulo 360 (flow along +x is red),
    value is ``clamp(|(u, v)| / max_mag, 0, 1)``. Returns ``uint8 (H, W, 3)``.
    """
    if not max_mag > 0:
        raise ValueError("max_mag must be positive")
    ang = np.mod(np.arctan2(fl.v, fl.u), 2 * np.pi) / (2 * np.pi)
    val = np.clip(np.hypot(fl.u, fl.v) / max_mag, 0.0, 1.0)
    rgb = np.array([colorsys.hsv_to_rgb(h, 1.0, x) for h, x in zip(ang.ravel(), val.ravel())])
    return np.floor(rgb * 255.0 + 0.5).astype(np.uint8).reshape(fl.u.shape + (3,))


def flow_channels(fl: FlowField, max_mag: float = DEFAULT_MAX_MAG) -> tuple[np.ndarray, np.ndarray]:
    """Network input planes: normalised magnitude and direction, both in ``[0, 1]``.

    Direction maps ``atan2(v, u)`` from ``[-pi, pi)`` to ``[0, 1)`` affinely;
    it is 0 where the flow is exactly zero.
    """
    if not max_mag > 0:
        raise ValueError("max_mag must be positive")
    mag = np.hypot(fl.u, fl.v)
    direction = np.mod((np.arctan2(fl.v, fl.u) + np.pi) / (2 * np.pi), 1.0)
    direction = np.where(mag == 0, 0.0, direction)
    return np.clip(mag / max_mag, 0.0, 1.0), direction


def flow_planes(frames, cfg: FlowConfig | None = None, max_mag: float = DEFAULT_MAX_MAG) -> np.ndarray:
    """``(len(frames), 2, H, W)`` magnitude/direction planes.

    Consecutive-pair flows give ``len(frames) - 1`` fields; the last one is
    repeated so the output aligns one-to-one with ``frames``.
    """
    fields = video_flow(frames, cfg)
    planes = [np.stack(flow_channels(fl, max_mag)) for fl in fields]
    planes.append(planes[-1])
    return np.stack(planes)


def write_ppm(rgb, path) -> None:
    """Write an ``(H, W, 3)`` uint8 image as binary PPM (P6)."""
    rgb = np.asarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (w, h))
        fh.write(rgb.tobytes())


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic, dims, maxval, raster = fh.read().split(b"\n", 3)
    if magic != b"P6" or maxval != b"255":
        raise ValueError("not an 8-bit binary PPM file")
    w, h = (int(t) for t in dims.split())
    return np.frombuffer(raster, dtype=np.uint8, count=w * h * 3).reshape(h, w, 3)
