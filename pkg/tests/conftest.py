import numpy as np
import pytest

from gamaka.analysis import KAMPITA, GamakaParams, synth_gamaka
from gamaka.audio_io import AudioBuffer

SR = 44100


def tone(freq, seconds, sr=SR, amp=0.5, harmonics=((1, 1.0),), phase=0.0):
    t = np.arange(int(round(seconds * sr))) / sr
    total = sum(a for _, a in harmonics)
    x = sum(a * np.sin(2 * np.pi * m * freq * t + phase) for m, a in harmonics)
    return amp * x / total


@pytest.fixture
def sr():
    return SR


@pytest.fixture
def kampita(sr):
    return synth_gamaka(KAMPITA, sr)


@pytest.fixture
def long_kampita(sr):
    """Same glide with half-second notes either side."""
    return synth_gamaka(GamakaParams(t_c1=0.5, t_c2=0.5), sr)


@pytest.fixture
def pure_tone(sr):
    return AudioBuffer(tone(125.0, 1.0, sr), sr)


@pytest.fixture
def tone_gap_tone(sr):
    x = np.concatenate((tone(125.0, 0.4, sr), np.zeros(int(0.3 * sr)), tone(125.0, 0.4, sr)))
    return AudioBuffer(x, sr)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(number, ok, detail):
        ACCEPTANCE_LINES.append(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
