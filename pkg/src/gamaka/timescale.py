"""Non-uniform slow-down: CP-notes and silence stretched, transients left as they are."""

import json
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import correlate

from .audio_io import AudioBuffer, frame_grid, frame_length, frame_rms_all
from .pitch import TrackerConfig, estimate_frame_pitch
from .segmentation import SegmentKind

log = logging.getLogger(__name__)

DEFAULT_CP_CAP_MS = 250.0
ENVELOPE_FLOOR = 1e-4
ATTACK_FRACTION = 0.9


@dataclass(frozen=True)
class PlanEntry:
    """Input and output frame ranges (inclusive) for one segment."""

    kind: SegmentKind
    in_start: int
    in_end: int
    out_start: int
    out_end: int
    attack: int = 0
    decay: int = 0

    @property
    def in_frames(self):
        return self.in_end - self.in_start + 1

    @property
    def out_frames(self):
        return self.out_end - self.out_start + 1


@dataclass(frozen=True)
class ScalePlan:
    R: float
    entries: tuple
    in_n_frames: int
    out_n_frames: int
    frame_ms: float
    cp_cap_ms: float = DEFAULT_CP_CAP_MS

    def validate(self):
        pos = 0
        for e in self.entries:
            if e.out_start != pos or e.out_end < e.out_start:
                raise ValueError(f"plan entry {e} breaks output contiguity at frame {pos}")
            if e.kind is SegmentKind.TRANSIENT and e.out_frames != e.in_frames:
                raise ValueError(f"transient {e} changes duration")
            pos = e.out_end + 1
        if pos != self.out_n_frames:
            raise ValueError("plan output does not cover [0, out_n_frames)")


def _check_factor(R, fractional):
    if not R >= 1:
        raise ValueError(f"slow-down factor must be >= 1, got {R}")
    if not fractional and R != int(R):
        raise ValueError(f"slow-down factor must be an integer, got {R}")


def attack_decay(rms, start, end):
    """Attack and decay lengths in frames for a CP-note spanning ``[start, end]``.

    Attack runs from ``start`` until the frame RMS first reaches 90% of the
    note's median RMS; decay is the mirror image from ``end``. Both are at
    least one frame and together leave at least one steady frame when the
    note is three frames or longer.
    """
    n = end - start + 1
    if n == 1:
        return 1, 0
    r = np.asarray(rms[start : end + 1])
    target = ATTACK_FRACTION * np.median(r)
    hit = np.flatnonzero(r >= target)
    if hit.size == 0:
        a = b = 1
    else:
        a = max(1, int(hit[0]))
        b = max(1, int(n - 1 - hit[-1]))
    limit = max(2, n - 1)
    while a + b > limit:
        if a >= b:
            a -= 1
        else:
            b -= 1
    return max(a, 1), max(b, 1)


def cp_output_frames(n, R, frame_ms, cp_cap_ms, fractional=False):
    """Output length of a CP-note of ``n`` frames.

    Notes shorter than ``cp_cap_ms`` are not stretched past the cap.
    """
    scaled = int(round(R * n)) if fractional else int(R) * n
    if n * frame_ms < cp_cap_ms:
        cap = math.ceil(cp_cap_ms / frame_ms - 1e-9)
        return max(n, min(scaled, cap))
    return scaled


def build_plan(seg, R, cp_cap_ms=DEFAULT_CP_CAP_MS, frame_rms=None, fractional=False):
    """Lay out the slowed-down timeline.

    CP-notes and silences take ``R`` times their frames (short CP-notes are
    capped), transients keep their length and start right after whatever
    precedes them. For a transient preceded only by stretched material this
    reproduces ``out_start = R * s`` and ``out_end = (R - 1) * s + e``.
    """
    _check_factor(R, fractional)
    if frame_rms is not None and len(frame_rms) < seg.n_frames:
        raise ValueError("frame_rms shorter than the segmentation")
    entries = []
    pos = 0
    for s in seg.segments:
        n = s.n_frames
        a = b = 0
        if s.kind is SegmentKind.TRANSIENT:
            out = n
        elif s.kind is SegmentKind.SILENCE:
            out = int(round(R * n)) if fractional else int(R) * n
        else:
            out = cp_output_frames(n, R, seg.frame_ms, cp_cap_ms, fractional)
            if frame_rms is not None:
                a, b = attack_decay(frame_rms, s.start, s.end)
            else:
                a, b = (1, 1) if n >= 2 else (1, 0)
        entries.append(PlanEntry(s.kind, s.start, s.end, pos, pos + out - 1, a, b))
        pos += out
    plan = ScalePlan(float(R), tuple(entries), seg.n_frames, pos, seg.frame_ms, float(cp_cap_ms))
    plan.validate()
    return plan


def effective_factor(plan):
    """Achieved slow-down, output frames over input frames."""
    return plan.out_n_frames / plan.in_n_frames


@dataclass(frozen=True)
class ScaleReport:
    R: float
    R_effective: float
    in_seconds: dict
    out_seconds: dict


def scale_report(plan):
    sec = plan.frame_ms / 1000.0
    din = {k.value: 0.0 for k in SegmentKind}
    dout = dict(din)
    for e in plan.entries:
        din[e.kind.value] += e.in_frames * sec
        dout[e.kind.value] += e.out_frames * sec
    return ScaleReport(plan.R, effective_factor(plan), din, dout)


def plan_to_dict(plan, schema_version=1):
    return {
        "schema_version": schema_version,
        "R": plan.R,
        "R_effective": effective_factor(plan),
        "frame_ms": plan.frame_ms,
        "cp_cap_ms": plan.cp_cap_ms,
        "in_n_frames": plan.in_n_frames,
        "out_n_frames": plan.out_n_frames,
        "entries": [
            {
                "kind": e.kind.value,
                "in_start": e.in_start,
                "in_end": e.in_end,
                "out_start": e.out_start,
                "out_end": e.out_end,
                "attack_frames": e.attack,
                "decay_frames": e.decay,
            }
            for e in plan.entries
        ],
    }


def write_plan_json(path, plan):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(plan_to_dict(plan), fh, indent=2)
        fh.write("\n")


def _raised_cosine(n):
    return 0.5 - 0.5 * np.cos(np.pi * (np.arange(n) + 0.5) / n)


def _loop(span, target_len, fade):
    """Tile ``span`` end to start with a crossfade of ``fade`` samples."""
    out = np.array(span, dtype=np.float64)
    fade = max(1, min(fade, span.size // 2))
    w = _raised_cosine(fade)
    while out.size < target_len:
        head = span[:fade] * w + out[-fade:] * (1 - w)
        out = np.concatenate((out[:-fade], head, span[fade:]))
    return out[:target_len]


def extend_pitch_synchronous(steady, period_samples, target_len):
    """Lengthen ``steady`` to ``target_len`` samples by repeating whole periods.

    Periods are copied from just before the middle of the span and inserted
    there, so the first and last parts of the input come out unchanged. The
    rounding left over after whole periods is spread across the insertions,
    and each splice gets a raised-cosine crossfade of a quarter period.
    """
    x = np.asarray(steady, dtype=np.float64)
    S = x.size
    P = int(round(period_samples))
    if target_len <= S:
        return x[:target_len].copy()
    if P <= 0:
        raise ValueError("period must be positive")
    if S < 2 * P:
        log.debug("steady span of %d samples is under two periods of %d; looping", S, P)
        return _loop(x, target_len, max(1, P // 4) if P <= S else S // 4)

    E = target_len - S
    k = max(1, int(round(E / P)))
    q, r = divmod(E, k)
    lengths = [q + 1] * r + [q] * (k - r)
    m = max(S // 2, max(lengths))
    fade = max(1, min(P // 4, S - m))
    w = _raised_cosine(fade)
    natural = x[m : m + fade]

    pieces = [x[:m]]
    for L in lengths:
        block = x[m - L : m].copy()
        f = min(fade, L)
        block[:f] = natural[:f] * (1 - w[:f]) + block[:f] * w[:f]
        pieces.append(block)
    pieces.append(x[m:])
    out = np.concatenate(pieces)
    assert out.size == target_len
    return out


def extend_silence(span, target_len, edge_len=0):
    """Stretch a silence by tiling its interior, keeping ``edge_len`` samples at each end."""
    x = np.asarray(span, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty silence span")
    if target_len <= x.size:
        return x[:target_len].copy()
    if edge_len and x.size > 2 * edge_len:
        head, interior, tail = x[:edge_len], x[edge_len:-edge_len], x[-edge_len:]
    else:
        head, interior, tail = x[:0], x, x[:0]
    fill = target_len - head.size - tail.size
    reps = -(-fill // interior.size)
    return np.concatenate((head, np.tile(interior, reps)[:fill], tail))


def _envelope(rms, n_samples, frame_len):
    """Frame RMS interpolated to per-sample resolution, anchored at frame centres."""
    centres = (np.arange(rms.size) + 0.5) * frame_len
    return np.interp(np.arange(n_samples) + 0.5, centres, rms)


def _cp_period(buf, grid_len, e, contour, tracker):
    if contour is not None:
        f = np.asarray(contour.f[e.in_start : e.in_end + 1])
    else:
        frames = buf.samples[e.in_start * grid_len : (e.in_end + 1) * grid_len].reshape(-1, grid_len)
        f = np.array([estimate_frame_pitch(fr, buf.sample_rate, tracker) for fr in frames])
    f = f[f > 0]
    if f.size == 0:
        return None
    return buf.sample_rate / float(np.median(f))


def render_cp(x, rms, frame_len, attack, decay, out_frames, period):
    """Stretch one CP-note's samples ``x`` to ``out_frames`` frames."""
    n = x.size // frame_len
    out_len = out_frames * frame_len
    if out_frames == n:
        return x.copy()
    a, b = attack, decay
    if n - a - b < 1:
        a = b = 0
    s0, s1 = a * frame_len, (n - b) * frame_len
    steady = x[s0:s1]
    env = np.maximum(_envelope(rms, x.size, frame_len)[s0:s1], ENVELOPE_FLOOR)
    target = out_len - s0 - (x.size - s1)
    if period is None:
        flat = _loop(steady / env, target, frame_len // 4)
    else:
        flat = extend_pitch_synchronous(steady / env, period, target)
    pos = np.linspace(0.0, steady.size - 1, target) if target > 1 else np.zeros(target)
    env_out = np.interp(pos, np.arange(steady.size), env)
    return np.concatenate((x[:s0], flat * env_out, x[s1:]))


def render(buf, seg, plan, contour=None, tracker=TrackerConfig()):
    """Synthesize the slowed-down signal described by ``plan``.

    Transients are copied sample for sample. CP-notes keep their attack and
    decay frames, have their steady part flattened by the frame-RMS envelope,
    extended period by period, and re-enveloped over the longer span.
    Silences are stretched by tiling their interior frames.
    """
    if len(plan.entries) != len(seg.segments) or plan.in_n_frames != seg.n_frames:
        raise ValueError("plan was not built from this segmentation")
    for e, s in zip(plan.entries, seg.segments):
        if (e.kind, e.in_start, e.in_end) != (s.kind, s.start, s.end):
            raise ValueError(f"plan entry {e} does not match segment {s}")
    F = frame_length(seg.frame_ms, buf.sample_rate)
    if seg.n_frames * F > len(buf):
        raise ValueError("segmentation covers more frames than the buffer holds")

    rms = frame_rms_all(buf, frame_grid(buf, seg.frame_ms))
    out = np.zeros(plan.out_n_frames * F)
    for e in plan.entries:
        x = buf.samples[e.in_start * F : (e.in_end + 1) * F]
        if e.kind is SegmentKind.TRANSIENT or e.out_frames == e.in_frames:
            y = x
        elif e.kind is SegmentKind.SILENCE:
            y = extend_silence(x, e.out_frames * F, edge_len=F)
        else:
            period = _cp_period(buf, F, e, contour, tracker)
            y = render_cp(x, rms[e.in_start : e.in_end + 1], F, e.attack, e.decay, e.out_frames, period)
        out[e.out_start * F : (e.out_end + 1) * F] = y
    return AudioBuffer(np.clip(out, -1.0, 1.0), buf.sample_rate)


def uniform_scale(buf, factor, window_ms=40.0, tolerance_ms=10.0):
    """Pitch-preserving waveform-similarity overlap-add stretch by ``factor``."""
    if not factor >= 1:
        raise ValueError(f"stretch factor must be >= 1, got {factor}")
    sr = buf.sample_rate
    N = 2 * max(2, int(round(window_ms / 2000.0 * sr)))
    Hs = N // 2
    Hs / factor
    tol = max(1, int(round(tolerance_ms / 1000.0 * sr)))
    win = np.hanning(N + 1)[:N]  # periodic: sums to 1 at 50% overlap

    x = buf.samples
    out_len = int(round(x.size * factor))
    pad = N + tol
    xp = np.concatenate((np.zeros(pad), x, np.zeros(pad + N + int(np.ceil(N / factor)))))
    n_frames = out_len // Hs + 3
    yp = np.zeros(n_frames * Hs + N)
    wsum = np.zeros_like(yp)
    energy = np.concatenate(([0.0], np.cumsum(xp * xp)))

    prev = None
    for k in range(n_frames):
        # output sample k*Hs - N maps to input sample (k*Hs - N) / factor
        nominal = pad + int(round((k * Hs - N) / factor))
        if prev is None:
            pos = nominal
        else:
            natural = xp[prev + Hs : prev + Hs + N]
            # the part of the window that lands inside the output must not
            # read past the end of the signal
            used = min(N, out_len - (k * Hs - N))
            hi = max(pad, min(nominal + tol, pad + x.size - used))
            lo = max(0, min(nominal - tol, hi - 2 * tol))
            region = xp[lo : hi + N]
            num = correlate(region, natural, mode="valid")
            cand_e = energy[lo + N : hi + N + 1] - energy[lo : hi + 1]
            nat_e = float(np.dot(natural, natural))
            denom = np.sqrt(np.maximum(cand_e * nat_e, 1e-300))
            score = np.where(cand_e * nat_e > 1e-20, num / denom, 0.0)
            offsets = np.arange(lo, hi + 1) - nominal
            score = score - 1e-9 * np.abs(offsets)
            pos = lo + int(np.argmax(score))
        yp[k * Hs : k * Hs + N] += xp[pos : pos + N] * win
        wsum[k * Hs : k * Hs + N] += win
        prev = pos
    y = np.where(wsum > 1e-6, yp / np.maximum(wsum, 1e-6), 0.0)[N : N + out_len]
    return AudioBuffer(np.clip(y, -1.0, 1.0), sr)
