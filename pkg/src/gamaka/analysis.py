"""Synthetic gamaka fixtures, window-feasibility bound and two-speed duration ratios."""

import csv
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .audio_io import AudioBuffer
from .pitch import WindowShape, window

CLASSES = ("cp_note", "transient", "silence", "overall")

SPREAD_THRESHOLD_DB = -20.0


@dataclass(frozen=True)
class GamakaParams:
    """A held note at ``f0``, a glide to ``f1`` and back over ``t_T`` seconds, then ``f0`` again.

    ``harmonics`` is a list of ``(multiple, relative_amplitude)`` pairs; every
    partial follows the fundamental's contour.
    """

    f0: float = 125.0
    f1: float = 150.0
    t_c1: float = 0.07
    t_c2: float = 0.07
    t_T: float = 0.2
    a1: float = 0.5
    theta1: float = 0.0
    harmonics: tuple = ((1, 1.0),)
    contour: str = "linear"

    def __post_init__(self):
        if self.f0 <= 0 or self.f1 <= 0:
            raise ValueError("frequencies must be positive")
        if min(self.t_c1, self.t_c2, self.t_T) < 0:
            raise ValueError("durations must be non-negative")
        if self.contour not in ("linear", "raised_cosine"):
            raise ValueError(f"unknown contour shape {self.contour!r}")
        object.__setattr__(self, "harmonics", tuple((float(m), float(a)) for m, a in self.harmonics))

    @property
    def duration(self):
        return self.t_c1 + self.t_T + self.t_c2

    @property
    def max_multiple(self):
        return max(m for m, _ in self.harmonics)


KAMPITA = GamakaParams()


def gamaka_contour(p, t):
    """Instantaneous fundamental frequency at times ``t`` (seconds)."""
    t = np.asarray(t, dtype=np.float64)
    f = np.full(t.shape, float(p.f0))
    if p.t_T <= 0 or p.f1 == p.f0:
        return f
    half = p.t_T / 2.0
    u = (t - p.t_c1) / half  # 0..1 rising, 1..2 falling
    inside = (u >= 0) & (u < 2)
    tri = np.where(u < 1, u, 2 - u)[inside]
    if p.contour == "raised_cosine":
        tri = 0.5 - 0.5 * np.cos(np.pi * tri)
    f[inside] = p.f0 + (p.f1 - p.f0) * tri
    return f


def synth_gamaka(p, sample_rate):
    """Phase-continuous oscillator following :func:`gamaka_contour`."""
    fmax = max(p.f0, p.f1) * p.max_multiple
    if sample_rate < 4 * fmax:
        raise ValueError(
            f"sample rate {sample_rate} Hz is below 4x the highest partial ({fmax:g} Hz)"
        )
    n = int(round(p.duration * sample_rate))
    t = np.arange(n) / sample_rate
    f = gamaka_contour(p, t)
    phase = np.concatenate(([0.0], np.cumsum(2 * np.pi * f[:-1] / sample_rate)))
    total = sum(a for _, a in p.harmonics)
    x = np.zeros(n)
    for m, a in p.harmonics:
        x += a * np.cos(m * phase + p.theta1)
    return AudioBuffer(p.a1 * x / total, sample_rate)


@dataclass(frozen=True)
class WindowFeasibility:
    rho_lower: float
    window_ms: float

    @property
    def semitone_spread(self):
        return 12.0 * math.log2(self.rho_lower)


def rho_lower_bound(f0, f1, W_ms, tT_ms):
    """Lower bound on the frequency ratio seen by a window of ``W_ms`` on a linear glide.

    The glide covers ``f0 -> f1`` in ``tT_ms / 2``.
    """
    if f0 <= 0 or W_ms < 0 or tT_ms <= 0:
        raise ValueError("f0 and t_T must be positive, W non-negative")
    if f1 < f0:
        raise ValueError("expected f1 >= f0")
    rho = 1.0 + (f1 - f0) / f0 * (W_ms / (tT_ms / 2.0))
    return WindowFeasibility(rho, float(W_ms))


def _edge(spec, k, thr, step):
    """Fractional bin where ``spec`` first drops below ``thr`` walking from ``k``."""
    i = k
    while 0 <= i + step < spec.size and spec[i + step] >= thr:
        i += step
    j = i + step
    if not 0 <= j < spec.size:
        return float(i)
    # linear interpolation of the crossing in dB
    a, b = 20 * np.log10(spec[i]), 20 * np.log10(max(spec[j], 1e-300))
    t = (a - 20 * np.log10(thr)) / (a - b) if a != b else 0.0
    return i + step * t


def band_edges(frame, sample_rate, shape=WindowShape.HANN, threshold_db=SPREAD_THRESHOLD_DB, n_fft=1 << 18):
    """Frequencies (Hz) bounding the contiguous band around the peak within ``threshold_db``."""
    x = np.asarray(frame, dtype=np.float64)
    spec = np.abs(np.fft.rfft(x * window(shape, x.size), n_fft))
    k = int(np.argmax(spec))
    thr = spec[k] * 10 ** (threshold_db / 20.0)
    hz = sample_rate / n_fft
    return _edge(spec, k, thr, -1) * hz, _edge(spec, k, thr, +1) * hz


def measure_spread(frame, f_ref, sample_rate, shape=WindowShape.HANN, threshold_db=SPREAD_THRESHOLD_DB):
    """Frequency ratio spanned by ``f_ref`` and the energy band of ``frame``.

    The band edges are pulled in by the half-width a steady tone of the same
    length shows at the same threshold, so a stationary frame at ``f_ref``
    measures 1.
    """
    x = np.asarray(frame, dtype=np.float64)
    t = np.arange(x.size) / sample_rate
    lo0, hi0 = band_edges(np.cos(2 * np.pi * f_ref * t), sample_rate, shape, threshold_db)
    half = (hi0 - lo0) / 2.0
    lo, hi = band_edges(x, sample_rate, shape, threshold_db)
    lo, hi = lo + half, hi - half
    if hi < lo:
        lo = hi = (lo + hi) / 2.0
    return max(hi, f_ref) / min(lo, f_ref)


def spectral_spread_demo(p, W_ms, sample_rate, shape=WindowShape.HANN):
    """Synthesize ``p`` and measure the spread of a window centred mid-transient."""
    buf = synth_gamaka(p, sample_rate)
    n = int(round(W_ms / 1000.0 * sample_rate))
    centre = int(round((p.t_c1 + p.t_T / 2.0) * sample_rate))
    start = centre - n // 2
    if start < 0 or start + n > len(buf):
        raise ValueError(f"a {W_ms} ms window does not fit around the transient centre")
    return measure_spread(buf.samples[start : start + n], p.f0, sample_rate, shape)


def spread_sweep(p, windows_ms, sample_rate, shape=WindowShape.HANN):
    """Rows of ``(W_ms, rho_L, measured_spread)``."""
    rows = []
    for W in windows_ms:
        rho = rho_lower_bound(p.f0, p.f1, W, p.t_T * 1000.0).rho_lower if p.f1 >= p.f0 else float("nan")
        rows.append((float(W), rho, spectral_spread_demo(p, W, sample_rate, shape)))
    return rows


@dataclass
class RatioReport:
    """Per-class durations (seconds) in two renditions and their ratios."""

    speed1: dict = field(default_factory=dict)
    speed2: dict = field(default_factory=dict)

    @property
    def ratios(self):
        out = {}
        for c in CLASSES:
            a, b = self.speed1.get(c, 0.0), self.speed2.get(c, 0.0)
            if b > 0:
                out[c] = a / b
            else:
                out[c] = math.inf if a > 0 else math.nan
        return out


def class_durations(seg):
    """Seconds spent in each segment class, plus ``overall``."""
    sec = seg.frame_ms / 1000.0
    d = {c: 0.0 for c in CLASSES}
    for s in seg.segments:
        d[s.kind.value] += s.n_frames * sec
    d["overall"] = seg.n_frames * sec
    return d


def ratio_report(seg1, seg2):
    """Duration ratios of rendition 1 to rendition 2, class by class.

    A zero duration in rendition 2 against a nonzero one in rendition 1
    gives ``inf``; zero against zero gives ``nan``.
    """
    return RatioReport(class_durations(seg1), class_durations(seg2))


def report_from_durations(speed1, speed2):
    """Build a report from explicit duration dicts.

    ``overall`` defaults to the class sum when a dict omits it.
    """
    s1, s2 = dict(speed1), dict(speed2)
    for d in (s1, s2):
        for c in CLASSES[:3]:
            d.setdefault(c, 0.0)
        d.setdefault("overall", sum(d[c] for c in CLASSES[:3]))
    return RatioReport(s1, s2)


@dataclass(frozen=True)
class DurationTableRow:
    raga: str
    n_varnams: int
    speed1: dict
    ratios: dict

    def speed2(self):
        """Second-speed durations recovered by dividing through the published ratios."""
        return {c: self.speed1[c] / self.ratios[c] for c in CLASSES}


def load_two_speed_table(path=None):
    """Published first-speed durations and ratios for six ragas."""
    if path is None:
        fh = resources.files("gamaka.data").joinpath("two_speed_durations.csv").open("r", encoding="utf-8")
    else:
        fh = open(path, newline="", encoding="utf-8")
    rows = []
    with fh:
        for r in csv.DictReader(fh):
            rows.append(
                DurationTableRow(
                    r["raga"],
                    int(r["n_varnams"]),
                    {c: float(r[f"{c}_s"]) for c in CLASSES},
                    {c: float(r[f"{c}_ratio"]) for c in CLASSES},
                )
            )
    return rows


REPORT_COLUMNS = [f"{c}_s" for c in CLASSES] + [f"{c}_ratio" for c in CLASSES]


def write_ratio_csv(path, report, label="", schema_version=1):
    """One row per rendition pair, laid out as durations of speed 1 then ratios."""
    ratios = report.ratios
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["schema_version", "label"] + REPORT_COLUMNS + [f"{c}_s2" for c in CLASSES])
        w.writerow(
            [schema_version, label]
            + [f"{report.speed1[c]:.6f}" for c in CLASSES]
            + [_fmt_ratio(ratios[c]) for c in CLASSES]
            + [f"{report.speed2[c]:.6f}" for c in CLASSES]
        )


def _fmt_ratio(r):
    if math.isinf(r):
        return "inf"
    if math.isnan(r):
        return "nan"
    return f"{r:.6f}"


def write_sweep_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["W_ms", "rho_L", "measured_spread"])
        for W, rho, spread in rows:
            w.writerow([f"{W:g}", f"{rho:.6f}", f"{spread:.6f}"])
