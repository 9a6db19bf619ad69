"""WAV input/output, frame decomposition and per-frame energy."""

import logging
import struct
import wave
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_FRAME_MS = 32.0
MIN_READ_RATE = 8000

_FORMAT_PCM = 1
_FORMAT_FLOAT = 3
_FORMAT_EXTENSIBLE = 0xFFFE


class WavError(Exception):
    """Base class for WAV parsing failures."""


class UnsupportedEncodingError(WavError):
    """The file is valid RIFF/WAVE but uses an encoding we do not read."""


class TruncatedWavError(WavError):
    """The file ends before the chunk sizes say it should."""


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    """Mono samples in [-1, 1] plus their sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise ValueError(f"samples must be 1-D, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("samples contain non-finite values")
        if x.size and np.max(np.abs(x)) > 1.0:
            raise ValueError("samples exceed the normalized range [-1, 1]")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate}")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.size

    @property
    def duration(self):
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class FrameGrid:
    """Non-overlapping, contiguous frames over a buffer; the partial tail is dropped."""

    frame_len_samples: int
    n_frames: int
    frame_ms: float
    sample_rate: int

    @property
    def n_samples(self):
        return self.frame_len_samples * self.n_frames

    def bounds(self, l):
        """Sample range ``[start, stop)`` of frame ``l``."""
        if not 0 <= l < self.n_frames:
            raise IndexError(f"frame {l} out of range [0, {self.n_frames})")
        start = l * self.frame_len_samples
        return start, start + self.frame_len_samples

    def frames(self, samples):
        """View ``samples`` as an ``(n_frames, frame_len_samples)`` array."""
        return np.asarray(samples)[: self.n_samples].reshape(self.n_frames, self.frame_len_samples)


def frame_length(frame_ms, sample_rate):
    return int(round(frame_ms / 1000.0 * sample_rate))


def frame_grid(buf, frame_ms=DEFAULT_FRAME_MS):
    if frame_ms <= 0:
        raise ValueError(f"frame_ms must be positive, got {frame_ms}")
    n = frame_length(frame_ms, buf.sample_rate)
    if n < 1 or len(buf) < n:
        raise ValueError(
            f"buffer of {len(buf)} samples is shorter than one {frame_ms} ms frame ({n} samples)"
        )
    return FrameGrid(n, len(buf) // n, float(frame_ms), buf.sample_rate)


def frame_rms(buf, grid, l):
    start, stop = grid.bounds(l)
    x = buf.samples[start:stop]
    return float(np.sqrt(np.mean(x * x)))


def frame_rms_all(buf, grid):
    """RMS of every frame, shape ``(n_frames,)``."""
    frames = grid.frames(buf.samples)
    return np.sqrt(np.mean(frames * frames, axis=1))


def quantize16(samples):
    """Integer PCM16 codes for normalized samples, clipping to [-1, 1] first."""
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    return np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")


def _chunks(data, path):
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = data[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise TruncatedWavError(f"{path}: chunk {cid!r} declares {size} bytes, {len(body)} present")
        yield cid, body
        pos += 8 + size + (size & 1)
    if pos < len(data) and len(data) - pos < 8:
        raise TruncatedWavError(f"{path}: dangling {len(data) - pos} bytes after last chunk")


def read_wav(path):
    """Read a PCM16 or float32 WAV file, downmixing stereo by channel mean."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12:
        raise TruncatedWavError(f"{path}: too short for a RIFF header")
    riff, _, wave_id = struct.unpack_from("<4sI4s", data, 0)
    if riff != b"RIFF" or wave_id != b"WAVE":
        raise UnsupportedEncodingError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    pcm = None
    for cid, body in _chunks(data, path):
        if cid == b"fmt ":
            if len(body) < 16:
                raise TruncatedWavError(f"{path}: fmt chunk is {len(body)} bytes")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
            if fmt[0] == _FORMAT_EXTENSIBLE and len(body) >= 26:
                # first two bytes of the subformat GUID carry the real tag
                fmt = (struct.unpack_from("<H", body, 24)[0],) + fmt[1:]
        elif cid == b"data":
            pcm = body
            break
    if fmt is None:
        raise TruncatedWavError(f"{path}: no fmt chunk")
    if pcm is None:
        raise TruncatedWavError(f"{path}: no data chunk")

    tag, channels, rate, _, block_align, bits = fmt
    if channels not in (1, 2):
        raise UnsupportedEncodingError(f"{path}: {channels} channels (only mono/stereo)")
    if tag == _FORMAT_PCM and bits == 16:
        dtype, scale = "<i2", 1.0 / 32768.0
    elif tag == _FORMAT_FLOAT and bits == 32:
        dtype, scale = "<f4", 1.0
    else:
        raise UnsupportedEncodingError(f"{path}: format tag {tag} with {bits} bits per sample")
    if rate < MIN_READ_RATE:
        raise UnsupportedEncodingError(f"{path}: sample rate {rate} Hz below {MIN_READ_RATE} Hz")
    if len(pcm) % block_align:
        raise TruncatedWavError(f"{path}: data chunk ends mid-frame")

    x = np.frombuffer(pcm, dtype=dtype).astype(np.float64) * scale
    x = x.reshape(-1, channels).mean(axis=1)
    if tag == _FORMAT_FLOAT:
        x = np.clip(np.nan_to_num(x), -1.0, 1.0)
    log.debug("read %s: %d samples @ %d Hz, %d ch", path, x.size, rate, channels)
    return AudioBuffer(x, rate)


def write_wav(path, buf):
    """Write ``buf`` as 16-bit PCM mono."""
    if len(buf) == 0:
        raise ValueError("refusing to write an empty buffer")
    codes = quantize16(buf.samples)
    try:
        with open(path, "wb") as fh, wave.open(fh, "wb") as wf:
            wf.setnchannels(1)
            wf.setsampwidth(2)
            wf.setframerate(buf.sample_rate)
            wf.writeframes(codes.tobytes())
    except OSError as exc:
        raise OSError(f"could not write {path}: {exc}") from exc
