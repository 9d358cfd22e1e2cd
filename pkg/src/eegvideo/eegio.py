"""Recording data model, the ERF interchange format and a synthetic EEG generator.

ERF layout (little-endian):

* line 1: UTF-8 JSON manifest terminated by ``\\n``::

    {"magic":"ERF1","channels":C,"samples":T,"trials":N,"rate":R,
     "names":[...],"positions":[[x,y,z],...],"labels":[...]}

* payload: ``N*C*T`` float32 values, trial-major, then channel, then time.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

MAGIC = "ERF1"
UNIT_TOL = 1e-6


class ErfFormatError(ValueError):
    """Raised when an ERF file or a recording violates the format contract."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ElectrodeLayout:
    """Channel names and 3D positions on the unit scalp sphere."""

    names: tuple
    positions: np.ndarray

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        pos = np.array(self.positions, dtype=np.float64)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "positions", _readonly(pos))
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ErfFormatError("positions must have shape (n, 3)")
        if len(names) != pos.shape[0]:
            raise ErfFormatError("channel-count mismatch: %d names, %d positions"
                                 % (len(names), pos.shape[0]))
        if len(set(names)) != len(names):
            raise ErfFormatError("electrode names must be unique")
        if len(names) < 3:
            raise ErfFormatError("at least 3 electrodes are required")
        if not np.all(np.isfinite(pos)):
            raise ErfFormatError("non-finite electrode position")
        norms = np.linalg.norm(pos, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_TOL):
            raise ErfFormatError("unnormalized electrode positions (must lie on the unit sphere)")

    def __len__(self):
        return len(self.names)

    def __eq__(self, other):
        if not isinstance(other, ElectrodeLayout):
            return NotImplemented
        return self.names == other.names and np.array_equal(self.positions, other.positions)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Trial:
    """One labelled trial: a (channels, samples) float32 matrix."""

    samples: np.ndarray
    label: int

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.float32)
        if x.ndim != 2:
            raise ErfFormatError("trial samples must be a (channels, samples) matrix")
        if not np.all(np.isfinite(x)):
            raise ErfFormatError("non-finite data in trial")
        object.__setattr__(self, "samples", _readonly(x))
        object.__setattr__(self, "label", int(self.label))

    def __eq__(self, other):
        if not isinstance(other, Trial):
            return NotImplemented
        return self.label == other.label and np.array_equal(self.samples, other.samples)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Recording:
    """A set of equally shaped trials sharing one layout and sampling rate."""

    layout: ElectrodeLayout
    sample_rate: float
    trials: tuple = field(default_factory=tuple)

    def __post_init__(self):
        trials = tuple(self.trials)
        object.__setattr__(self, "trials", trials)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))
        if not (self.sample_rate > 0 and math.isfinite(self.sample_rate)):
            raise ErfFormatError("sample_rate must be positive")
        n_ch = len(self.layout)
        shapes = {t.samples.shape for t in trials}
        for t in trials:
            if t.samples.shape[0] != n_ch:
                raise ErfFormatError("channel-count mismatch: layout has %d channels, trial has %d"
                                     % (n_ch, t.samples.shape[0]))
            if t.label < 0:
                raise ErfFormatError("labels must be non-negative class indices")
        if len(shapes) > 1:
            raise ErfFormatError("all trials must share n_samples")

    @property
    def n_channels(self) -> int:
        return len(self.layout)

    @property
    def n_samples(self) -> int:
        return self.trials[0].samples.shape[1] if self.trials else 0

    @property
    def n_classes(self) -> int:
        return int(max(self.labels) + 1) if self.trials else 0

    @property
    def X(self) -> np.ndarray:
        """Stacked samples, shape ``(n_trials, n_channels, n_samples)``."""
        if not self.trials:
            return np.zeros((0, self.n_channels, 0), dtype=np.float32)
        return np.stack([t.samples for t in self.trials])

    @property
    def labels(self) -> np.ndarray:
        return np.array([t.label for t in self.trials], dtype=np.int64)

    def subset(self, idx) -> "Recording":
        return Recording(self.layout, self.sample_rate, tuple(self.trials[i] for i in idx))

    def __len__(self):
        return len(self.trials)

    def __eq__(self, other):
        if not isinstance(other, Recording):
            return NotImplemented
        return (self.layout == other.layout and self.sample_rate == other.sample_rate
                and self.trials == other.trials)

    __hash__ = None


def from_arrays(X, y, layout: ElectrodeLayout, sample_rate: float) -> Recording:
    """Build a :class:`Recording` from a ``(n_trials, C, T)`` array and labels."""
    X = np.asarray(X)
    trials = tuple(Trial(X[i], int(lbl)) for i, lbl in enumerate(np.asarray(y)))
    return Recording(layout, sample_rate, trials)


# ---------------------------------------------------------------------------
# ERF I/O

def _manifest(rec: Recording) -> bytes:
    meta = {
        "magic": MAGIC,
        "channels": rec.n_channels,
        "samples": rec.n_samples,
        "trials": len(rec.trials),
        "rate": rec.sample_rate,
        "names": list(rec.layout.names),
        "positions": rec.layout.positions.tolist(),
        "labels": [t.label for t in rec.trials],
    }
    return json.dumps(meta, separators=(",", ":"), allow_nan=False).encode("utf-8") + b"\n"


def write_recording(rec: Recording, path) -> None:
    """Write ``rec`` as an ERF file. Identical recordings give identical bytes."""
    payload = rec.X.astype("<f4", copy=False).tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(_manifest(rec))
        fh.write(payload)


def read_recording(path) -> Recording:
    """Read an ERF file written by :func:`write_recording`."""
    with open(path, "rb") as fh:
        header = fh.readline()
        payload = fh.read()
    if not header.endswith(b"\n"):
        raise ErfFormatError("malformed manifest: missing newline terminator")
    try:
        meta = json.loads(header.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ErfFormatError("malformed manifest: %s" % exc) from None
    required = ("magic", "channels", "samples", "trials", "rate", "names", "positions", "labels")
    if not isinstance(meta, dict) or any(k not in meta for k in required):
        raise ErfFormatError("malformed manifest: missing keys")
    if meta["magic"] != MAGIC:
        raise ErfFormatError("malformed manifest: bad magic %r" % meta["magic"])
    try:
        C, T, N = int(meta["channels"]), int(meta["samples"]), int(meta["trials"])
        rate = float(meta["rate"])
    except (TypeError, ValueError):
        raise ErfFormatError("malformed manifest: non-numeric sizes") from None
    if min(C, T, N) < 0:
        raise ErfFormatError("malformed manifest: negative sizes")
    if len(meta["names"]) != C or len(meta["positions"]) != C:
        raise ErfFormatError("channel-count mismatch: manifest declares %d channels but lists "
                             "%d names / %d positions" % (C, len(meta["names"]), len(meta["positions"])))
    if len(meta["labels"]) != N:
        raise ErfFormatError("malformed manifest: %d labels for %d trials" % (len(meta["labels"]), N))
    expected = N * C * T * 4
    if len(payload) != expected:
        per_channel = N * T * 4
        if per_channel and len(payload) % per_channel == 0:
            raise ErfFormatError("channel-count mismatch: manifest declares %d channels, payload holds %d"
                                 % (C, len(payload) // per_channel))
        raise ErfFormatError("payload size mismatch: expected %d bytes, got %d" % (expected, len(payload)))
    data = np.frombuffer(payload, dtype="<f4").reshape(N, C, T).astype(np.float32)
    if not np.all(np.isfinite(data)):
        raise ErfFormatError("non-finite data in payload")
    layout = ElectrodeLayout(tuple(meta["names"]), np.asarray(meta["positions"], dtype=np.float64))
    return from_arrays(data, meta["labels"], layout, rate)


def erf_size(n_channels: int, n_samples: int, n_trials: int, manifest_len: int) -> int:
    """Expected file size for an ERF with the given dimensions."""
    return manifest_len + 4 * n_channels * n_samples * n_trials


# ---------------------------------------------------------------------------
# Layouts

# 22-channel motor-imagery montage laid out on a (lateral, anterior) grid in
# 10% steps of the nasion-inion arc (18 degrees each).
_MI22_GRID = [
    ("Fz", 0, 2),
    ("FC3", -2, 1), ("FC1", -1, 1), ("FCz", 0, 1), ("FC2", 1, 1), ("FC4", 2, 1),
    ("C5", -3, 0), ("C3", -2, 0), ("C1", -1, 0), ("Cz", 0, 0), ("C2", 1, 0), ("C4", 2, 0), ("C6", 3, 0),
    ("CP3", -2, -1), ("CP1", -1, -1), ("CPz", 0, -1), ("CP2", 1, -1), ("CP4", 2, -1),
    ("P1", -1, -2), ("Pz", 0, -2), ("P2", 1, -2),
    ("POz", 0, -3),
]


def sphere_from_grid(gx: float, gy: float, step_deg: float = 18.0) -> np.ndarray:
    """Map a (lateral, anterior) grid position to the unit sphere.

    The grid is treated as an equidistant map around the vertex ``(0, 0, 1)``:
    the grid radius is the angular distance from the vertex.
    """
    px, py = np.deg2rad(gx * step_deg), np.deg2rad(gy * step_deg)
    rho = math.hypot(px, py)
    theta = math.atan2(py, px)
    return np.array([math.sin(rho) * math.cos(theta), math.sin(rho) * math.sin(theta), math.cos(rho)])


def standard_layout_22() -> ElectrodeLayout:
    """The 22-electrode motor-imagery montage (x: right, y: nose, z: vertex)."""
    names = tuple(n for n, _, _ in _MI22_GRID)
    pos = np.stack([sphere_from_grid(gx, gy) for _, gx, gy in _MI22_GRID])
    pos /= np.linalg.norm(pos, axis=1, keepdims=True)
    return ElectrodeLayout(names, pos)


# ---------------------------------------------------------------------------
# Synthetic data

# (band name, source frequency in Hz) assigned to class k in order.
SYNTH_CLASS_TONES = (("alpha", 10.0), ("beta", 21.0), ("theta", 5.5), ("delta", 2.0), ("gamma", 40.0))


def synth_recording(seed: int, n_classes: int, trials_per_class: int, layout: ElectrodeLayout,
                    sample_rate: float, duration: float, *, amplitude: float = 10.0,
                    noise_std: float = 2.0, freq_jitter: float = 0.4) -> Recording:
    """Generate a spectrally and spatially separable multi-class recording.

    Class ``k`` carries a sinusoidal source at ``SYNTH_CLASS_TONES[k]`` (random
    phase, frequency jitter of ``freq_jitter`` Hz, amplitude jitter of 20%)
    projected through a Gaussian spatial gain bump centred on a class-specific
    electrode, plus white Gaussian sensor noise. Trials are interleaved by class.
    """
    if n_classes < 2:
        raise ValueError("n_classes must be >= 2")
    if n_classes > len(SYNTH_CLASS_TONES):
        raise ValueError("at most %d classes are supported" % len(SYNTH_CLASS_TONES))
    if trials_per_class < 0:
        raise ValueError("trials_per_class must be >= 0")
    n_samples = int(round(sample_rate * duration))
    if n_samples <= 0:
        raise ValueError("duration * sample_rate must be positive")
    for _, f in SYNTH_CLASS_TONES[:n_classes]:
        if f + freq_jitter >= sample_rate / 2:
            raise ValueError("sample_rate too low for the synthetic class tones")

    rng = np.random.default_rng(seed)
    pos = layout.positions
    n_ch = len(layout)
    centres = np.round(np.linspace(0, n_ch - 1, n_classes)).astype(int)
    gains = []
    for c in centres:
        ang = np.arccos(np.clip(pos @ pos[c], -1.0, 1.0))
        gains.append(np.exp(-0.5 * (ang / 0.35) ** 2))
    t = np.arange(n_samples) / sample_rate

    trials = []
    for i in range(n_classes * trials_per_class):
        k = i % n_classes
        f = SYNTH_CLASS_TONES[k][1] + rng.uniform(-freq_jitter, freq_jitter)
        phase = rng.uniform(0, 2 * np.pi)
        amp = amplitude * rng.uniform(0.8, 1.2)
        source = amp * np.sin(2 * np.pi * f * t + phase)
        x = np.outer(gains[k], source) + noise_std * rng.standard_normal((n_ch, n_samples))
        trials.append(Trial(x.astype(np.float32), k))
    return Recording(layout, sample_rate, tuple(trials))


def class_band(k: int) -> str:
    """Rhythm band carrying the synthetic source of class ``k``."""
    return SYNTH_CLASS_TONES[k][0]

