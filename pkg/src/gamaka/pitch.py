"""Frame-wise pitch tracking, semitone conversion and short-time spectra."""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .audio_io import frame_rms_all


@dataclass(frozen=True)
class TrackerConfig:
    """Pitch tracker thresholds.

    Parameters
    ----------
    fmin, fmax : float
        Search range in Hz.
    voicing_threshold : float
        Minimum normalized autocorrelation at the chosen lag.
    silence_db : float
        Frames whose RMS is this far below the loudest frame are unvoiced.
    octave_ratio : float
        The lowest-lag peak reaching this fraction of the global maximum wins.
    """

    fmin: float = 60.0
    fmax: float = 1000.0
    voicing_threshold: float = 0.5
    silence_db: float = -45.0
    octave_ratio: float = 0.9

    def __post_init__(self):
        if not 0 < self.fmin < self.fmax:
            raise ValueError(f"need 0 < fmin < fmax, got {self.fmin}, {self.fmax}")


@dataclass(frozen=True, eq=False)
class PitchContour:
    """Per-frame f0 in Hz; 0.0 marks unvoiced frames."""

    f: np.ndarray
    frame_ms: float

    def __post_init__(self):
        f = np.asarray(self.f, dtype=np.float64)
        if f.ndim != 1:
            raise ValueError("pitch contour must be 1-D")
        if np.any(f < 0) or not np.all(np.isfinite(f)):
            raise ValueError("pitch values must be finite and non-negative")
        f.setflags(write=False)
        object.__setattr__(self, "f", f)

    def __len__(self):
        return self.f.size

    @property
    def voiced(self):
        return self.f > 0


@dataclass(frozen=True, eq=False)
class SemitoneContour:
    """Semitones relative to ``tonic_hz``; NaN marks frames with no pitch."""

    n: np.ndarray
    tonic_hz: float
    frame_ms: float

    def __len__(self):
        return self.n.size

    @property
    def voiced(self):
        return ~np.isnan(self.n)


class WindowShape(str, Enum):
    RECTANGULAR = "rectangular"
    HANN = "hann"


# null-to-null main-lobe width in units of 1/W
_MAIN_LOBE_BINS = {WindowShape.RECTANGULAR: 2.0, WindowShape.HANN: 4.0}


@dataclass(frozen=True)
class WindowConfig:
    window_shape: WindowShape = WindowShape.HANN
    W: float = 100.0
    w: float = 100.0

    def __post_init__(self):
        if self.W <= 0 or self.w <= 0:
            raise ValueError("window size and shift must be positive")
        object.__setattr__(self, "window_shape", WindowShape(self.window_shape))

    @property
    def main_lobe_hz(self):
        """Null-to-null main-lobe width of the window's spectrum, in Hz."""
        return _MAIN_LOBE_BINS[self.window_shape] * 1000.0 / self.W

    def resolves(self, f0):
        """Whether two partials ``f0`` Hz apart fall outside one main lobe."""
        return self.main_lobe_hz <= f0


def window(shape, n):
    shape = WindowShape(shape)
    if shape is WindowShape.RECTANGULAR:
        return np.ones(n)
    # symmetric Hann without the zero endpoints
    return np.hanning(n + 2)[1:-1]


def nccf(frame, max_lag):
    """Normalized cross-correlation of ``frame`` with itself at lags ``0..max_lag``."""
    x = np.asarray(frame, dtype=np.float64)
    x = x - x.mean()
    n = x.size
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(x, nfft)
    acf = np.fft.irfft(spec * np.conj(spec), nfft)[: max_lag + 1]
    c = np.concatenate(([0.0], np.cumsum(x * x)))
    lags = np.arange(max_lag + 1)
    head = c[n - lags]  # energy of x[0 : n - lag]
    tail = c[n] - c[lags]  # energy of x[lag : n]
    denom = np.sqrt(head * tail)
    out = np.zeros(max_lag + 1)
    ok = denom > 1e-12 * max(c[n], 1e-300)
    out[ok] = acf[ok] / denom[ok]
    return out


def estimate_frame_pitch(frame, sample_rate, cfg=TrackerConfig()):
    """Estimate f0 of one frame, or return 0.0 when unvoiced.

    The lag search is capped at half the frame so that every candidate
    period is seen at least twice.
    """
    x = np.asarray(frame, dtype=np.float64)
    lag_min = max(2, int(np.floor(sample_rate / cfg.fmax)))
    lag_max = min(int(np.ceil(sample_rate / cfg.fmin)), x.size // 2)
    if lag_max <= lag_min + 1:
        return 0.0
    r = nccf(x, lag_max + 1)

    inner = r[lag_min : lag_max + 1]
    left = r[lag_min - 1 : lag_max]
    right = r[lag_min + 1 : lag_max + 2]
    peaks = np.flatnonzero((inner > left) & (inner >= right)) + lag_min
    if peaks.size == 0:
        return 0.0
    best = r[peaks].max()
    if best < cfg.voicing_threshold:
        return 0.0
    lag = peaks[np.argmax(r[peaks] >= cfg.octave_ratio * best)]

    a, b, c = r[lag - 1], r[lag], r[lag + 1]
    denom = a - 2 * b + c
    shift = 0.5 * (a - c) / denom if denom < 0 else 0.0
    f = sample_rate / (lag + np.clip(shift, -0.5, 0.5))
    return float(np.clip(f, cfg.fmin, cfg.fmax))


def track_pitch(buf, grid, cfg=TrackerConfig()):
    """One f0 estimate per frame of ``grid``."""
    if grid.sample_rate != buf.sample_rate or grid.n_samples > len(buf):
        raise ValueError("frame grid does not belong to this buffer")
    rms = frame_rms_all(buf, grid)
    f = np.zeros(grid.n_frames)
    peak = rms.max() if rms.size else 0.0
    if peak <= 0:
        return PitchContour(f, grid.frame_ms)
    floor = peak * 10 ** (cfg.silence_db / 20.0)
    frames = grid.frames(buf.samples)
    for l in np.flatnonzero(rms >= floor):
        if rms[l] > 0:
            f[l] = estimate_frame_pitch(frames[l], buf.sample_rate, cfg)
    return PitchContour(f, grid.frame_ms)


def to_semitones(pc, tonic_hz):
    """Map voiced frames to ``12 * log2(f / tonic_hz)``; unvoiced frames become NaN."""
    if not tonic_hz > 0:
        raise ValueError(f"tonic must be positive, got {tonic_hz}")
    n = np.full(len(pc), np.nan)
    v = pc.voiced
    n[v] = 12.0 * np.log2(pc.f[v] / tonic_hz)
    return SemitoneContour(n, float(tonic_hz), pc.frame_ms)


def stft_frame(frame, shape=WindowShape.HANN, n_fft=None):
    """Magnitude spectrum of one windowed frame (``n_fft // 2 + 1`` bins)."""
    x = np.asarray(frame, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty frame")
    n_fft = n_fft or x.size
    return np.abs(np.fft.rfft(x * window(shape, x.size), n_fft))
