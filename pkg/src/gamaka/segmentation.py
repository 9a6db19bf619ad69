"""Split a pitch contour into constant-pitch notes, transients and silence."""

import json
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .audio_io import DEFAULT_FRAME_MS, frame_grid
from .pitch import TrackerConfig, to_semitones, track_pitch

_EPS = 1e-9


class SegmentKind(str, Enum):
    CP_NOTE = "cp_note"
    TRANSIENT = "transient"
    SILENCE = "silence"


@dataclass(frozen=True)
class Segment:
    """Inclusive frame range ``[start, end]`` with a label.

    ``snapped`` marks CP-notes introduced by stationary-point snapping; the
    slope condition is not enforced for those.
    """

    kind: SegmentKind
    start: int
    end: int
    mean_semitone: float = None
    snapped: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", SegmentKind(self.kind))
        if self.start > self.end:
            raise ValueError(f"segment start {self.start} after end {self.end}")

    @property
    def n_frames(self):
        return self.end - self.start + 1


@dataclass(frozen=True)
class SegmentationConfig:
    cp_tolerance: float = 0.3
    cp_max_slope: float = 1.0
    cp_min_frames: int = 2
    snap_window_ms: float = 80.0
    snap_tolerance: float = 0.3
    cp_peaks: tuple = tuple(float(k) for k in range(-24, 37))
    snap: bool = True

    def __post_init__(self):
        for name in ("cp_tolerance", "cp_max_slope", "cp_min_frames", "snap_window_ms", "snap_tolerance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        object.__setattr__(self, "cp_peaks", tuple(sorted(float(p) for p in self.cp_peaks)))


@dataclass(frozen=True)
class Segmentation:
    segments: tuple
    n_frames: int
    frame_ms: float = DEFAULT_FRAME_MS

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        self.validate()

    def validate(self):
        pos = 0
        prev = None
        for s in self.segments:
            if s.start != pos:
                raise ValueError(f"segment {s} does not start at frame {pos}")
            if prev is not None and prev.kind == s.kind and s.kind is not SegmentKind.CP_NOTE:
                raise ValueError(f"adjacent {s.kind.value} segments at frame {s.start} must be merged")
            pos = s.end + 1
            prev = s
        if pos != self.n_frames:
            raise ValueError(f"segments cover [0, {pos}) but there are {self.n_frames} frames")

    def of_kind(self, kind):
        kind = SegmentKind(kind)
        return [s for s in self.segments if s.kind is kind]

    @property
    def C(self):
        return len(self.of_kind(SegmentKind.CP_NOTE))

    @property
    def I(self):
        return len(self.of_kind(SegmentKind.TRANSIENT))

    @property
    def K(self):
        return len(self.of_kind(SegmentKind.SILENCE))

    @property
    def kinds(self):
        return [s.kind for s in self.segments]

    def labels(self):
        """Per-frame kind array."""
        out = np.empty(self.n_frames, dtype=object)
        for s in self.segments:
            out[s.start : s.end + 1] = s.kind
        return out


def best_fit_slope(values, frame_ms):
    """Least-squares slope in semitones per second, time taken at frame centres."""
    y = np.asarray(values, dtype=np.float64)
    if y.size < 2:
        raise ValueError("need at least two values for a slope")
    t = (np.arange(y.size) + 0.5) * frame_ms / 1000.0
    tc = t - t.mean()
    return float(np.dot(tc, y - y.mean()) / np.dot(tc, tc))


def is_cp_run(values, frame_ms, tolerance=0.3, max_slope=1.0):
    """Whether ``values`` satisfy the constant-pitch conditions."""
    y = np.asarray(values, dtype=np.float64)
    if y.size == 0 or np.any(np.isnan(y)):
        return False
    m = y.mean()
    if y.max() - m > tolerance + _EPS or m - y.min() > tolerance + _EPS:
        return False
    return y.size < 2 or abs(best_fit_slope(y, frame_ms)) <= max_slope + _EPS


def _runs(mask):
    """Inclusive ``(start, end)`` pairs of maximal True runs."""
    m = np.concatenate(([False], np.asarray(mask, dtype=bool), [False]))
    d = np.diff(m.astype(np.int8))
    return list(zip(np.flatnonzero(d == 1), np.flatnonzero(d == -1) - 1))


def detect_silence(pc):
    if len(pc) == 0:
        raise ValueError("empty pitch contour")
    return [Segment(SegmentKind.SILENCE, int(a), int(b)) for a, b in _runs(~pc.voiced)]


def _longest_run_from(y, frame_ms, tolerance, max_slope):
    """Length of the longest prefix of ``y`` (all voiced) that is a CP run."""
    # once max - min exceeds twice the tolerance no longer prefix can pass
    hi = np.maximum.accumulate(y)
    lo = np.minimum.accumulate(y)
    over = np.flatnonzero(hi - lo > 2 * tolerance + _EPS)
    if over.size:
        y, hi, lo = y[: over[0]], hi[: over[0]], lo[: over[0]]
    n = np.arange(1, y.size + 1, dtype=np.float64)
    k = n - 1
    mean = np.cumsum(y) / n
    ok = (hi - mean <= tolerance + _EPS) & (mean - lo <= tolerance + _EPS)
    # slope against frame index, then scaled to seconds
    sk = np.cumsum(k)
    skk = np.cumsum(k * k)
    sky = np.cumsum(k * y)
    sxx = skk - sk * sk / n
    sxy = sky - sk * np.cumsum(y) / n
    with np.errstate(invalid="ignore", divide="ignore"):
        slope = np.where(n > 1, sxy / sxx, 0.0) * 1000.0 / frame_ms
    ok &= np.abs(slope) <= max_slope + _EPS
    return int(np.flatnonzero(ok)[-1]) + 1


def detect_cp_notes(sc, cfg=SegmentationConfig()):
    """Greedy left-to-right constant-pitch notes.

    From each start frame the longest valid run is taken; runs shorter than
    ``cfg.cp_min_frames`` are skipped and the scan moves one frame on.
    """
    if len(sc) == 0:
        raise ValueError("empty semitone contour")
    notes = []
    for a, b in _runs(sc.voiced):
        i = a
        while i <= b:
            y = sc.n[i : b + 1]
            length = _longest_run_from(y, sc.frame_ms, cfg.cp_tolerance, cfg.cp_max_slope)
            if length >= cfg.cp_min_frames:
                j = i + length - 1
                notes.append(Segment(SegmentKind.CP_NOTE, int(i), int(j), float(np.mean(sc.n[i : j + 1]))))
                i = j + 1
            else:
                i += 1
    return notes


def derive_transients(L, silences, cp_notes):
    """Everything not covered by silence or CP-notes, as maximal runs."""
    covered = np.zeros(L, dtype=int)
    for s in list(silences) + list(cp_notes):
        if s.start < 0 or s.end >= L:
            raise ValueError(f"segment {s} outside [0, {L})")
        covered[s.start : s.end + 1] += 1
    if np.any(covered > 1):
        raise ValueError("silence and CP-note segments overlap")
    return [Segment(SegmentKind.TRANSIENT, int(a), int(b)) for a, b in _runs(covered == 0)]


def assemble(L, silences, cp_notes, frame_ms=DEFAULT_FRAME_MS):
    segs = list(silences) + list(cp_notes) + derive_transients(L, silences, cp_notes)
    return Segmentation(tuple(sorted(segs, key=lambda s: s.start)), L, frame_ms)


def _smoothed(n):
    """3-frame median within voiced runs; endpoints use the available pair."""
    out = n.copy()
    for a, b in _runs(~np.isnan(n)):
        seg = n[a : b + 1]
        if seg.size < 3:
            continue
        padded = np.concatenate(([seg[0]], seg, [seg[-1]]))
        win = np.lib.stride_tricks.sliding_window_view(padded, 3)
        out[a : b + 1] = np.median(win, axis=1)
    return out


def stationary_points(sc):
    """Frames where the smoothed contour has a (non-strict) local extremum.

    Ends of a voiced run count as one-sided extrema.
    """
    s = _smoothed(sc.n)
    points = []
    for a, b in _runs(sc.voiced):
        for l in range(a, b + 1):
            dl = s[l] - s[l - 1] if l > a else 0.0
            dr = s[l + 1] - s[l] if l < b else 0.0
            if dl * dr <= 0:
                points.append(l)
    return points


def _nearest_peak(value, peaks, tolerance):
    peaks = np.asarray(peaks)
    if peaks.size == 0:
        return None
    k = int(np.argmin(np.abs(peaks - value)))
    return float(peaks[k]) if abs(peaks[k] - value) <= tolerance + _EPS else None


def snap_stationary_points(sc, seg, cfg=SegmentationConfig()):
    """Relabel flat spans around stationary points inside transients as CP-notes.

    A span of ``snap_window_ms`` centred on a stationary point becomes a
    CP-note when every value in it lies within ``snap_tolerance`` of a single
    entry of ``cfg.cp_peaks``. The slope condition is not checked. Spans are
    clipped to their transient; a snapped span merges with neighbouring
    CP-notes that sit at the same peak.
    """
    if len(sc) != seg.n_frames:
        raise ValueError("contour and segmentation lengths differ")
    half = int(round(cfg.snap_window_ms / 2.0 / sc.frame_ms))
    peak_of = np.full(seg.n_frames, np.nan)
    labels = seg.labels()
    points = [l for l in stationary_points(sc) if labels[l] is SegmentKind.TRANSIENT]
    if not points:
        return seg
    owner = {}
    for s in seg.of_kind(SegmentKind.TRANSIENT):
        for l in range(s.start, s.end + 1):
            owner[l] = s
    for l in points:
        t = owner[l]
        a, b = max(t.start, l - half), min(t.end, l + half)
        vals = sc.n[a : b + 1]
        if np.any(np.isnan(vals)):
            continue
        peak = _nearest_peak(float(np.mean(vals)), cfg.cp_peaks, cfg.snap_tolerance)
        if peak is None or np.max(np.abs(vals - peak)) > cfg.snap_tolerance + _EPS:
            continue
        peak_of[a : b + 1] = peak

    items = []
    for s in seg.of_kind(SegmentKind.CP_NOTE):
        key = _nearest_peak(s.mean_semitone, cfg.cp_peaks, cfg.snap_tolerance)
        items.append([s.start, s.end, s.mean_semitone, key, s.snapped])
    for a, b in _runs(~np.isnan(peak_of)):
        # a run may hold several peaks; split where the peak changes
        start = a
        for l in range(a + 1, b + 2):
            if l > b or peak_of[l] != peak_of[start]:
                p = float(peak_of[start])
                items.append([start, l - 1, p, p, True])
                start = l

    merged = []
    for item in sorted(items):
        prev = merged[-1] if merged else None
        if (
            prev is not None
            and prev[1] + 1 == item[0]
            and item[3] is not None
            and prev[3] == item[3]
            and (prev[4] or item[4])
        ):
            merged[-1] = [prev[0], item[1], item[3], item[3], True]
        else:
            merged.append(item)

    keep = [
        Segment(SegmentKind.CP_NOTE, int(a), int(b), float(mean), snapped)
        for a, b, mean, _, snapped in merged
        if not snapped or b - a + 1 >= cfg.cp_min_frames
    ]
    return assemble(seg.n_frames, seg.of_kind(SegmentKind.SILENCE), keep, seg.frame_ms)


@dataclass(frozen=True)
class Analysis:
    """Intermediate products of :func:`analyze`."""

    grid: object
    contour: object
    semitones: object
    segmentation: Segmentation
    frame_rms: np.ndarray = field(repr=False, default=None)


def segment_contour(sc, silences, cfg=SegmentationConfig()):
    """Silence list plus a semitone contour to a full segmentation."""
    seg = assemble(len(sc), silences, detect_cp_notes(sc, cfg), sc.frame_ms)
    if cfg.snap:
        seg = snap_stationary_points(sc, seg, cfg)
    return seg


def analyze(buf, tonic_hz, cfg=SegmentationConfig(), tracker=TrackerConfig(), frame_ms=DEFAULT_FRAME_MS):
    """Frame, track, convert to semitones and segment ``buf``."""
    from .audio_io import frame_rms_all

    grid = frame_grid(buf, frame_ms)
    pc = track_pitch(buf, grid, tracker)
    sc = to_semitones(pc, tonic_hz)
    seg = segment_contour(sc, detect_silence(pc), cfg)
    return Analysis(grid, pc, sc, seg, frame_rms_all(buf, grid))


def segment(buf, tonic_hz, cfg=SegmentationConfig(), tracker=TrackerConfig(), frame_ms=DEFAULT_FRAME_MS):
    return analyze(buf, tonic_hz, cfg, tracker, frame_ms).segmentation


def segmentation_to_dict(seg, schema_version=1):
    sec = seg.frame_ms / 1000.0
    items = []
    for s in seg.segments:
        d = {
            "kind": s.kind.value,
            "start_frame": s.start,
            "end_frame": s.end,
            "start_s": round(s.start * sec, 6),
            "end_s": round((s.end + 1) * sec, 6),
        }
        if s.kind is SegmentKind.CP_NOTE:
            d["mean_semitone"] = round(s.mean_semitone, 6)
            d["snapped"] = s.snapped
        items.append(d)
    return {
        "schema_version": schema_version,
        "frame_ms": seg.frame_ms,
        "n_frames": seg.n_frames,
        "segments": items,
    }


def segmentation_from_dict(d):
    segs = [
        Segment(
            SegmentKind(item["kind"]),
            int(item["start_frame"]),
            int(item["end_frame"]),
            item.get("mean_semitone"),
            bool(item.get("snapped", False)),
        )
        for item in d["segments"]
    ]
    return Segmentation(tuple(segs), int(d["n_frames"]), float(d["frame_ms"]))


def write_segmentation_json(path, seg):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(segmentation_to_dict(seg), fh, indent=2)
        fh.write("\n")


def read_segmentation_json(path):
    with open(path, encoding="utf-8") as fh:
        return segmentation_from_dict(json.load(fh))


def with_frame_ms(seg, frame_ms):
    return replace(seg, frame_ms=frame_ms)
