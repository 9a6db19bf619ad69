"""Command-line entry point: ``gamaka {segment,slowdown,compare,ratios,synth}``."""

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .analysis import KAMPITA, GamakaParams, ratio_report, synth_gamaka, write_ratio_csv
from .audio_io import AudioBuffer, WavError, read_wav, write_wav
from .estimators import CPNoteSegmenter, NonUniformSlowdown
from .segmentation import SegmentKind, write_segmentation_json
from .timescale import DEFAULT_CP_CAP_MS, uniform_scale, write_plan_json

log = logging.getLogger("gamaka")


class _Outputs:
    """Tracks files written by a command so they can be removed on failure."""

    def __init__(self):
        self.paths = []

    def add(self, path):
        path = Path(path)
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        self.paths.append(path)
        return path

    def discard(self):
        for p in self.paths:
            try:
                p.unlink()
            except FileNotFoundError:
                pass


def _positive(kind):
    def parse(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v

    return parse


def _add_segmentation_flags(p):
    g = p.add_argument_group("segmentation")
    g.add_argument("--tonic", type=_positive(float), required=True, help="tonic frequency in Hz (required)")
    g.add_argument("--frame-ms", type=_positive(float), default=32.0, help="analysis frame length (default: %(default)s ms)")
    g.add_argument("--cp-tolerance", type=_positive(float), default=0.3,
                   help="max deviation from the note mean (default: %(default)s semitones)")
    g.add_argument("--cp-max-slope", type=_positive(float), default=1.0,
                   help="max best-fit slope of a CP-note (default: %(default)s semitones/s)")
    g.add_argument("--cp-min-frames", type=_positive(int), default=2, help="shortest CP-note (default: %(default)s frames)")
    g.add_argument("--snap-window-ms", type=_positive(float), default=80.0,
                   help="span checked around stationary points (default: %(default)s ms)")
    g.add_argument("--snap-tolerance", type=_positive(float), default=0.3,
                   help="max distance from a note peak when snapping (default: %(default)s semitones)")
    g.add_argument("--no-snap", action="store_true", help="disable stationary-point snapping")
    g.add_argument("--silence-db", type=float, default=-45.0,
                   help="silence floor relative to the loudest frame (default: %(default)s dB)")


def _segmenter(args):
    return CPNoteSegmenter(
        tonic_hz=args.tonic,
        frame_ms=args.frame_ms,
        cp_tolerance=args.cp_tolerance,
        cp_max_slope=args.cp_max_slope,
        cp_min_frames=args.cp_min_frames,
        snap=not args.no_snap,
        snap_window_ms=args.snap_window_ms,
        snap_tolerance=args.snap_tolerance,
        silence_db=args.silence_db,
    )


def _summary(seg):
    sec = seg.frame_ms / 1000.0
    lines = []
    for kind in SegmentKind:
        segs = seg.of_kind(kind)
        total = sum(s.n_frames for s in segs) * sec
        lines.append(f"{kind.value:<10} count={len(segs):<4d} duration={total:.3f} s")
    lines.append(f"{'overall':<10} frames={seg.n_frames:<4d} duration={seg.n_frames * sec:.3f} s")
    return "\n".join(lines)


def write_contour_csv(path, segmenter):
    grid = segmenter.grid_
    f = segmenter.contour_.f
    n = segmenter.semitones_.n
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["frame_index", "time_s", "f_hz", "semitones"])
        for l in range(grid.n_frames):
            t = l * grid.frame_len_samples / grid.sample_rate
            st = "" if f[l] == 0 else f"{n[l]:.6f}"
            w.writerow([l, f"{t:.6f}", f"{f[l]:.6f}", st])


def cmd_segment(args, out):
    buf = read_wav(args.input)
    s = _segmenter(args).fit(buf)
    write_segmentation_json(out.add(args.out), s.segmentation_)
    if args.csv:
        write_contour_csv(out.add(args.csv), s)
    print(_summary(s.segmentation_))


def _slowdown(args, buf):
    return NonUniformSlowdown(
        factor=args.factor,
        cp_cap_ms=args.cp_cap_ms,
        segmenter=_segmenter(args),
        fractional=args.fractional,
    ).fit(buf)


def cmd_slowdown(args, out):
    buf = read_wav(args.input)
    est = _slowdown(args, buf)
    y = est.transform(buf)
    write_wav(out.add(args.out), y)
    if args.plan:
        write_plan_json(out.add(args.plan), est.plan_)
    print(f"R={est.plan_.R:g}")
    print(f"R_effective={est.effective_factor_:.4f}")


def _split(buf, times):
    """Cut ``buf`` at ``times`` seconds; returns the list of pieces."""
    edges = [0] + [int(round(t * buf.sample_rate)) for t in times] + [len(buf)]
    edges = sorted(set(min(max(e, 0), len(buf)) for e in edges))
    return [AudioBuffer(buf.samples[a:b], buf.sample_rate) for a, b in zip(edges, edges[1:]) if b > a]


def cmd_compare(args, out):
    buf = read_wav(args.input)
    est = _slowdown(args, buf)
    nonuni = est.transform(buf)
    r_eff = est.effective_factor_
    # both algorithms see the same frame-aligned input
    aligned = AudioBuffer(buf.samples[: est.segmenter_.grid_.n_samples], buf.sample_rate)
    uni = uniform_scale(aligned, r_eff)
    outdir = Path(args.outdir)
    stem = Path(args.input).stem
    files = {}
    for name, b in (("nonuniform", nonuni), ("uniform", uni)):
        p = out.add(outdir / f"{stem}_{name}.wav")
        write_wav(p, b)
        files[name] = [str(p.name)]
        if args.split_s:
            files[name] = []
            for i, piece in enumerate(_split(b, args.split_s)):
                q = out.add(outdir / f"{stem}_{name}_part{i + 1}.wav")
                write_wav(q, piece)
                files[name].append(str(q.name))
    manifest = {
        "schema_version": 1,
        "input": str(args.input),
        "R": est.plan_.R,
        "R_effective": r_eff,
        "input_duration_s": buf.duration,
        "nonuniform_duration_s": nonuni.duration,
        "uniform_duration_s": uni.duration,
        "split_s": list(args.split_s or []),
        "files": files,
    }
    with open(out.add(outdir / "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    print(f"R={est.plan_.R:g}")
    print(f"R_effective={r_eff:.4f}")


def cmd_ratios(args, out):
    segs = []
    for path in (args.speed1, args.speed2):
        segs.append(_segmenter(args).fit(read_wav(path)).segmentation_)
    report = ratio_report(*segs)
    write_ratio_csv(out.add(args.out), report, label=f"{Path(args.speed1).name}/{Path(args.speed2).name}")
    for c, r in report.ratios.items():
        print(f"{c:<10} {report.speed1[c]:9.3f} s {report.speed2[c]:9.3f} s  ratio={r:.3f}")


def _harmonics(text):
    pairs = []
    for item in text.split(","):
        m, _, a = item.partition(":")
        pairs.append((float(m), float(a or 1.0)))
    return tuple(pairs)


def cmd_synth(args, out):
    if args.preset == "kampita":
        p = KAMPITA
    else:
        p = GamakaParams()
    overrides = {
        "f0": args.f0,
        "f1": args.f1,
        "t_c1": args.t_c1,
        "t_c2": args.t_c2,
        "t_T": args.t_T,
        "a1": args.amplitude,
        "harmonics": args.harmonics,
        "contour": args.contour,
    }
    kw = {k: v for k, v in overrides.items() if v is not None}
    p = GamakaParams(**{**p.__dict__, **kw})
    write_wav(out.add(args.out), synth_gamaka(p, args.sample_rate))
    print(f"wrote {args.out}: {p.duration:.3f} s")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gamaka",
        description="Segment melodic audio into CP-notes, transients and silence, and slow it down "
        "without stretching transients.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="segment a recording and write JSON")
    p.add_argument("input")
    _add_segmentation_flags(p)
    p.add_argument("--out", required=True, help="segmentation JSON path")
    p.add_argument("--csv", help="optional pitch contour CSV path")
    p.set_defaults(func=cmd_segment)

    def slow_flags(p):
        _add_segmentation_flags(p)
        p.add_argument("--factor", type=float, required=True, help="slow-down factor R (integer unless --fractional)")
        p.add_argument("--cp-cap-ms", type=_positive(float), default=DEFAULT_CP_CAP_MS,
                       help="CP-notes shorter than this are not stretched beyond it (default: %(default)s ms)")
        p.add_argument("--fractional", action="store_true", help="allow non-integer factors")

    p = sub.add_parser("slowdown", help="non-uniform slow-down")
    p.add_argument("input")
    slow_flags(p)
    p.add_argument("--out", required=True, help="output WAV path")
    p.add_argument("--plan", help="optional plan JSON path")
    p.set_defaults(func=cmd_slowdown)

    p = sub.add_parser("compare", help="non-uniform vs uniform slow-down at the same effective factor")
    p.add_argument("input")
    slow_flags(p)
    p.add_argument("--outdir", required=True)
    p.add_argument("--split-s", type=float, nargs="+", help="also cut both outputs at these times (seconds)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("ratios", help="duration ratios between two renditions")
    p.add_argument("speed1")
    p.add_argument("speed2")
    _add_segmentation_flags(p)
    p.add_argument("--out", required=True, help="report CSV path")
    p.set_defaults(func=cmd_ratios)

    p = sub.add_parser("synth", help="write a synthetic gamaka fixture")
    p.add_argument("--preset", choices=["kampita"], help="f0=125, f1=150, 70/200/70 ms")
    p.add_argument("--f0", type=_positive(float))
    p.add_argument("--f1", type=_positive(float))
    p.add_argument("--t-c1", type=float, help="seconds held before the transient")
    p.add_argument("--t-c2", type=float, help="seconds held after the transient")
    p.add_argument("--t-T", type=float, help="transient duration in seconds")
    p.add_argument("--amplitude", type=float)
    p.add_argument("--harmonics", type=_harmonics, help="e.g. 1:1,2:0.5,3:0.5")
    p.add_argument("--contour", choices=["linear", "raised_cosine"])
    p.add_argument("--sample-rate", type=_positive(int), default=44100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    logging.basicConfig(
        level=os.environ.get("GAMAKA_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    out = _Outputs()
    try:
        args.func(args, out)
    except (WavError, ValueError, OSError) as exc:
        out.discard()
        print(f"gamaka {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except BaseException:
        out.discard()
        raise
    return 0


if __name__ == "__main__":
    sys.exit(main())
