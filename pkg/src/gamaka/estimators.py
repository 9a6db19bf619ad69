"""scikit-learn style wrappers around the segmentation and slow-down pipeline."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .audio_io import DEFAULT_FRAME_MS, AudioBuffer
from .pitch import TrackerConfig
from .segmentation import SegmentationConfig, analyze
from .timescale import DEFAULT_CP_CAP_MS, build_plan, effective_factor, render, scale_report, uniform_scale


def check_audio(X, sample_rate=None):
    """Coerce ``X`` to an :class:`AudioBuffer`.

    ``X`` may already be a buffer, or a 1-D array in which case
    ``sample_rate`` is required.
    """
    if isinstance(X, AudioBuffer):
        if sample_rate is not None and sample_rate != X.sample_rate:
            raise ValueError(f"sample_rate {sample_rate} disagrees with buffer rate {X.sample_rate}")
        return X
    if sample_rate is None:
        raise TypeError("sample_rate is required when X is a plain array")
    x = np.asarray(X, dtype=np.float64)
    if x.ndim == 2 and 1 in x.shape:
        x = x.ravel()
    return AudioBuffer(x, sample_rate)


def check_tonic(tonic_hz):
    if tonic_hz is None or not tonic_hz > 0:
        raise ValueError(f"tonic_hz must be a positive frequency, got {tonic_hz}")
    return float(tonic_hz)


class CPNoteSegmenter(TransformerMixin, BaseEstimator):
    """Label each frame as CP-note, transient or silence.

    ``fit`` tracks pitch and segments the buffer; ``transform`` returns the
    :class:`~gamaka.segmentation.Segmentation` (refitting if given a
    different buffer).

    Attributes
    ----------
    grid_, contour_, semitones_, segmentation_, frame_rms_
        Products of the last fit.
    """

    def __init__(
        self,
        tonic_hz=None,
        frame_ms=DEFAULT_FRAME_MS,
        cp_tolerance=0.3,
        cp_max_slope=1.0,
        cp_min_frames=2,
        snap=True,
        snap_window_ms=80.0,
        snap_tolerance=0.3,
        cp_peaks=None,
        fmin=60.0,
        fmax=1000.0,
        voicing_threshold=0.5,
        silence_db=-45.0,
    ):
        self.tonic_hz = tonic_hz
        self.frame_ms = frame_ms
        self.cp_tolerance = cp_tolerance
        self.cp_max_slope = cp_max_slope
        self.cp_min_frames = cp_min_frames
        self.snap = snap
        self.snap_window_ms = snap_window_ms
        self.snap_tolerance = snap_tolerance
        self.cp_peaks = cp_peaks
        self.fmin = fmin
        self.fmax = fmax
        self.voicing_threshold = voicing_threshold
        self.silence_db = silence_db

    def segmentation_config(self):
        kw = dict(
            cp_tolerance=self.cp_tolerance,
            cp_max_slope=self.cp_max_slope,
            cp_min_frames=self.cp_min_frames,
            snap_window_ms=self.snap_window_ms,
            snap_tolerance=self.snap_tolerance,
            snap=self.snap,
        )
        if self.cp_peaks is not None:
            kw["cp_peaks"] = tuple(self.cp_peaks)
        return SegmentationConfig(**kw)

    def tracker_config(self):
        return TrackerConfig(
            fmin=self.fmin,
            fmax=self.fmax,
            voicing_threshold=self.voicing_threshold,
            silence_db=self.silence_db,
        )

    def fit(self, X, y=None, sample_rate=None):
        buf = check_audio(X, sample_rate)
        tonic = check_tonic(self.tonic_hz)
        a = analyze(buf, tonic, self.segmentation_config(), self.tracker_config(), self.frame_ms)
        self.grid_ = a.grid
        self.contour_ = a.contour
        self.semitones_ = a.semitones
        self.segmentation_ = a.segmentation
        self.frame_rms_ = a.frame_rms
        self._fitted_on = buf
        return self

    def transform(self, X, sample_rate=None):
        check_is_fitted(self, "segmentation_")
        buf = check_audio(X, sample_rate)
        if buf is not self._fitted_on:
            return self.fit(buf).segmentation_
        return self.segmentation_


class NonUniformSlowdown(TransformerMixin, BaseEstimator):
    """Slow audio down by ``factor`` without stretching pitch transients.

    ``fit`` segments the input and builds the output plan; ``transform``
    renders it. ``segmenter`` defaults to a :class:`CPNoteSegmenter` with
    ``tonic_hz``.

    Attributes
    ----------
    segmenter_ : CPNoteSegmenter
    plan_ : ScalePlan
    effective_factor_ : float
        Output frames over input frames.
    report_ : ScaleReport
    """

    def __init__(self, factor=2, tonic_hz=None, cp_cap_ms=DEFAULT_CP_CAP_MS, segmenter=None, fractional=False):
        self.factor = factor
        self.tonic_hz = tonic_hz
        self.cp_cap_ms = cp_cap_ms
        self.segmenter = segmenter
        self.fractional = fractional

    def fit(self, X, y=None, sample_rate=None):
        buf = check_audio(X, sample_rate)
        if self.segmenter is None:
            seg = CPNoteSegmenter(tonic_hz=self.tonic_hz)
        else:
            from sklearn.base import clone

            seg = clone(self.segmenter)
            if self.tonic_hz is not None:
                seg.set_params(tonic_hz=self.tonic_hz)
        seg.fit(buf)
        self.segmenter_ = seg
        self.plan_ = build_plan(
            seg.segmentation_, self.factor, self.cp_cap_ms, seg.frame_rms_, fractional=self.fractional
        )
        self.effective_factor_ = effective_factor(self.plan_)
        self.report_ = scale_report(self.plan_)
        return self

    def transform(self, X, sample_rate=None):
        check_is_fitted(self, "plan_")
        buf = check_audio(X, sample_rate)
        if buf is not self.segmenter_._fitted_on:
            raise ValueError("transform must be called on the buffer passed to fit")
        return render(buf, self.segmenter_.segmentation_, self.plan_, contour=self.segmenter_.contour_)


class UniformSlowdown(TransformerMixin, BaseEstimator):
    """Stretch the whole signal by ``factor`` with waveform-similarity overlap-add."""

    def __init__(self, factor=2.0, window_ms=40.0, tolerance_ms=10.0):
        self.factor = factor
        self.window_ms = window_ms
        self.tolerance_ms = tolerance_ms

    def fit(self, X=None, y=None, sample_rate=None):
        if not self.factor >= 1:
            raise ValueError(f"factor must be >= 1, got {self.factor}")
        return self

    def transform(self, X, sample_rate=None):
        buf = check_audio(X, sample_rate)
        return uniform_scale(buf, self.factor, self.window_ms, self.tolerance_ms)
