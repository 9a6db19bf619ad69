"""Constant-pitch / transient segmentation and transient-preserving slow-down."""

__version__ = "0.1.0"

from .audio_io import AudioBuffer, FrameGrid, frame_grid, frame_rms, read_wav, write_wav
from .pitch import PitchContour, SemitoneContour, TrackerConfig, to_semitones, track_pitch
from .segmentation import Segment, SegmentKind, Segmentation, SegmentationConfig, segment
from .timescale import ScalePlan, build_plan, effective_factor, render, uniform_scale
from .analysis import GamakaParams, KAMPITA, ratio_report, rho_lower_bound, synth_gamaka
from .estimators import CPNoteSegmenter, NonUniformSlowdown, UniformSlowdown

__all__ = [
    "AudioBuffer", "FrameGrid", "frame_grid", "frame_rms", "read_wav", "write_wav",
    "PitchContour", "SemitoneContour", "TrackerConfig", "to_semitones", "track_pitch",
    "Segment", "SegmentKind", "Segmentation", "SegmentationConfig", "segment",
    "ScalePlan", "build_plan", "effective_factor", "render", "uniform_scale",
    "GamakaParams", "KAMPITA", "ratio_report", "rho_lower_bound", "synth_gamaka",
    "CPNoteSegmenter", "NonUniformSlowdown", "UniformSlowdown",
]
