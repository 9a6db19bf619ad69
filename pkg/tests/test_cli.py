import csv
import json

import numpy as np
import pytest

from gamaka.audio_io import AudioBuffer, read_wav, write_wav
from gamaka.cli import build_parser, main

SUBCOMMANDS = ["segment", "slowdown", "compare", "ratios", "synth"]


@pytest.fixture
def kampita_wav(tmp_path, kampita):
    p = tmp_path / "kampita.wav"
    write_wav(p, kampita)
    return p


@pytest.fixture
def long_wav(tmp_path, long_kampita):
    p = tmp_path / "long.wav"
    write_wav(p, long_kampita)
    return p


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_segment(capsys, tmp_path, kampita_wav):
    out = tmp_path / "seg.json"
    contour = tmp_path / "f0.csv"
    code, text, _ = run(capsys, "segment", kampita_wav, "--tonic", 125, "--out", out, "--csv", contour)
    assert code == 0
    d = json.loads(out.read_text())
    assert [s["kind"] for s in d["segments"]] == ["cp_note", "transient", "cp_note"]
    assert "cp_note    count=2" in text and "transient  count=1" in text
    rows = list(csv.DictReader(contour.open()))
    assert len(rows) == d["n_frames"]
    assert float(rows[0]["semitones"]) == pytest.approx(0.0, abs=0.1)


def test_segment_silent_file(capsys, tmp_path):
    wav = tmp_path / "silent.wav"
    write_wav(wav, AudioBuffer(np.zeros(44100), 44100))
    code, text, _ = run(capsys, "segment", wav, "--tonic", 125, "--out", tmp_path / "s.json")
    assert code == 0
    d = json.loads((tmp_path / "s.json").read_text())
    assert [s["kind"] for s in d["segments"]] == ["silence"]
    assert "cp_note    count=0    duration=0.000" in text


def test_missing_tonic_is_usage_error(capsys, tmp_path, kampita_wav):
    with pytest.raises(SystemExit) as exc:
        main(["segment", str(kampita_wav), "--out", str(tmp_path / "x.json")])
    assert exc.value.code == 2
    assert "--tonic" in capsys.readouterr().err


def test_bad_input_fails_and_cleans_up(capsys, tmp_path):
    bad = tmp_path / "bad.wav"
    bad.write_bytes(b"not a wav file at all")
    out = tmp_path / "seg.json"
    code, _, err = run(capsys, "segment", bad, "--tonic", 125, "--out", out)
    assert code == 1
    assert "error" in err
    assert not out.exists()


def test_partial_outputs_removed(capsys, tmp_path, kampita_wav, monkeypatch):
    import gamaka.cli as cli

    def boom(*a, **k):
        raise OSError("disk full")

    monkeypatch.setattr(cli, "write_contour_csv", boom)
    out = tmp_path / "seg.json"
    code, _, err = run(capsys, "segment", kampita_wav, "--tonic", 125, "--out", out, "--csv", tmp_path / "c.csv")
    assert code == 1 and "disk full" in err
    assert not out.exists()


def test_slowdown(capsys, tmp_path, kampita_wav):
    out = tmp_path / "slow.wav"
    plan = tmp_path / "plan.json"
    code, text, _ = run(capsys, "slowdown", kampita_wav, "--tonic", 125, "--factor", 2, "--out", out, "--plan", plan)
    assert code == 0
    r_eff = float(text.split("R_effective=")[1])
    assert 1.0 < r_eff < 2.0
    assert json.loads(plan.read_text())["R_effective"] == pytest.approx(r_eff, abs=1e-4)


def test_slowdown_identity(capsys, tmp_path, kampita_wav):
    out = tmp_path / "same.wav"
    code, text, _ = run(capsys, "slowdown", kampita_wav, "--tonic", 125, "--factor", 1, "--out", out)
    assert code == 0 and "R_effective=1.0000" in text
    x, y = read_wav(kampita_wav), read_wav(out)
    np.testing.assert_array_equal(y.samples, x.samples[: len(y)])


def test_slowdown_pure_tone(capsys, tmp_path, pure_tone):
    wav = tmp_path / "tone.wav"
    write_wav(wav, pure_tone)
    code, text, _ = run(capsys, "slowdown", wav, "--tonic", 125, "--factor", 2, "--out", tmp_path / "o.wav")
    assert code == 0
    assert float(text.split("R_effective=")[1]) == pytest.approx(2.0, abs=0.02)


def test_slowdown_rejects_fraction_without_flag(capsys, tmp_path, kampita_wav):
    out = tmp_path / "o.wav"
    code, _, err = run(capsys, "slowdown", kampita_wav, "--tonic", 125, "--factor", 1.5, "--out", out)
    assert code == 1 and "integer" in err
    assert not out.exists()
    code, _, _ = run(capsys, "slowdown", kampita_wav, "--tonic", 125, "--factor", 1.5, "--fractional", "--out", out)
    assert code == 0 and out.exists()


def test_compare(capsys, tmp_path, long_wav):
    outdir = tmp_path / "cmp"
    code, _, _ = run(capsys, "compare", long_wav, "--tonic", 125, "--factor", 2, "--outdir", outdir, "--split-s", 0.8)
    assert code == 0
    m = json.loads((outdir / "manifest.json").read_text())
    assert m["schema_version"] == 1 and m["R"] == 2.0
    assert 1.0 < m["R_effective"] < 2.0
    frame_s = 1411 / 44100
    assert abs(m["nonuniform_duration_s"] - m["uniform_duration_s"]) <= frame_s
    for name in ("nonuniform", "uniform"):
        assert len(m["files"][name]) == 2
        assert read_wav(outdir / m["files"][name][0]).duration == pytest.approx(0.8, abs=1e-4)


def test_compare_identity(capsys, tmp_path, kampita_wav):
    outdir = tmp_path / "cmp"
    code, _, _ = run(capsys, "compare", kampita_wav, "--tonic", 125, "--factor", 1, "--outdir", outdir)
    assert code == 0
    x = read_wav(kampita_wav)
    for name in ("nonuniform", "uniform"):
        y = read_wav(outdir / f"kampita_{name}.wav")
        err = y.samples - x.samples[: len(y)]
        assert np.sum(err**2) <= 1e-4 * np.sum(x.samples[: len(y)] ** 2)


def test_ratios_same_file(capsys, tmp_path, kampita_wav):
    out = tmp_path / "r.csv"
    code, _, _ = run(capsys, "ratios", kampita_wav, kampita_wav, "--tonic", 125, "--out", out)
    assert code == 0
    row = next(csv.DictReader(out.open()))
    assert float(row["cp_note_ratio"]) == 1.0 and float(row["overall_ratio"]) == 1.0


def test_ratios_self_consistency(capsys, tmp_path, long_kampita):
    """A slowed rendition compared to the source: CP-notes change far more than transients."""
    from gamaka.estimators import NonUniformSlowdown

    slow = NonUniformSlowdown(factor=3, tonic_hz=125.0).fit(long_kampita)
    a, b = tmp_path / "s3.wav", tmp_path / "s1.wav"
    write_wav(a, slow.transform(long_kampita))
    # a different sample rate for speed 2 is fine, durations are in seconds
    half = AudioBuffer(long_kampita.samples[::2], 22050)
    write_wav(b, half)
    out = tmp_path / "r.csv"
    code, _, _ = run(capsys, "ratios", a, b, "--tonic", 125, "--out", out)
    assert code == 0
    row = next(csv.DictReader(out.open()))
    assert float(row["cp_note_ratio"]) > 2.0
    assert float(row["cp_note_ratio"]) > 1.5 * float(row["transient_ratio"])


def test_synth_preset(capsys, tmp_path):
    out = tmp_path / "k.wav"
    assert run(capsys, "synth", "--preset", "kampita", "--out", out)[0] == 0
    assert read_wav(out).duration == pytest.approx(0.34, abs=1e-4)


def test_synth_pure_tone(capsys, tmp_path):
    out = tmp_path / "t.wav"
    code, _, _ = run(capsys, "synth", "--t-T", 0, "--t-c1", 0.2, "--t-c2", 0.2, "--out", out)
    assert code == 0
    x = read_wav(out).samples
    t = np.arange(x.size) / 44100
    np.testing.assert_allclose(x, 0.5 * np.cos(2 * np.pi * 125 * t), atol=1 / 32768)


def test_synth_aliasing_error(capsys, tmp_path):
    out = tmp_path / "a.wav"
    code, _, err = run(capsys, "synth", "--preset", "kampita", "--sample-rate", 400, "--out", out)
    assert code == 1 and "sample rate" in err
    assert not out.exists()


def test_synth_then_segment_recovers_design(capsys, tmp_path):
    # boundaries on the 1411-sample frame grid so the design is representable; with
    # this peak the two crest frames are neither a flat pair nor near a semitone
    f1 = 125 * 2 ** (4.5 / 12)
    frame_s = 1411 / 44100
    design = {"cp1": 10, "tr": 6, "cp2": 10}
    wav = tmp_path / "k.wav"
    run(
        capsys, "synth",
        "--t-c1", design["cp1"] * frame_s, "--t-T", design["tr"] * frame_s, "--t-c2", design["cp2"] * frame_s,
        "--f1", f1, "--harmonics", "1:1,2:0.5", "--out", wav,
    )
    out = tmp_path / "s.json"
    assert run(capsys, "segment", wav, "--tonic", 125, "--out", out)[0] == 0
    segs = json.loads(out.read_text())["segments"]
    assert [s["kind"] for s in segs] == ["cp_note", "transient", "cp_note"]
    for s, want in zip(segs, design.values()):
        assert abs(s["end_frame"] - s["start_frame"] + 1 - want) <= 1


@pytest.mark.parametrize("cmd", SUBCOMMANDS)
def test_help_shows_defaults(capsys, cmd):
    with pytest.raises(SystemExit) as exc:
        main([cmd, "--help"])
    assert exc.value.code == 0
    text = " ".join(capsys.readouterr().out.split())
    if cmd != "synth":
        for default in ("32.0 ms", "0.3 semitones", "1.0 semitones/s", "80.0 ms"):
            assert default in text
    if cmd in ("slowdown", "compare"):
        assert "250.0 ms" in text


def test_parser_lists_subcommands():
    text = build_parser().format_help()
    for cmd in SUBCOMMANDS:
        assert cmd in text


def test_deterministic(capsys, tmp_path, kampita_wav):
    a, b = tmp_path / "a.wav", tmp_path / "b.wav"
    for out in (a, b):
        run(capsys, "slowdown", kampita_wav, "--tonic", 125, "--factor", 3, "--out", out)
    assert a.read_bytes() == b.read_bytes()
