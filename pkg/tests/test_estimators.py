import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from gamaka.audio_io import AudioBuffer
from gamaka.estimators import CPNoteSegmenter, NonUniformSlowdown, UniformSlowdown, check_audio, check_tonic
from gamaka.segmentation import SegmentKind


def test_check_audio():
    buf = AudioBuffer(np.zeros(10), 8000)
    assert check_audio(buf) is buf
    assert check_audio(np.zeros((10, 1)), 8000).sample_rate == 8000
    with pytest.raises(TypeError):
        check_audio(np.zeros(10))
    with pytest.raises(ValueError):
        check_audio(buf, 16000)


@pytest.mark.parametrize("bad", [None, 0, -5.0])
def test_check_tonic(bad):
    with pytest.raises(ValueError):
        check_tonic(bad)


def test_params_round_trip():
    est = CPNoteSegmenter(tonic_hz=146.8, cp_tolerance=0.25)
    params = est.get_params()
    assert params["tonic_hz"] == 146.8 and params["frame_ms"] == 32.0
    c = clone(est)
    assert c.get_params() == params
    c.set_params(snap=False)
    assert c.snap is False and est.snap is True


def test_segmenter_fit_transform(kampita):
    est = CPNoteSegmenter(tonic_hz=125.0)
    with pytest.raises(NotFittedError):
        est.transform(kampita)
    seg = est.fit_transform(kampita)
    assert seg.kinds == [SegmentKind.CP_NOTE, SegmentKind.TRANSIENT, SegmentKind.CP_NOTE]
    assert est.contour_.f.size == seg.n_frames
    assert est.transform(kampita) is seg


def test_segmenter_accepts_arrays(kampita):
    seg = CPNoteSegmenter(tonic_hz=125.0).fit(kampita.samples, sample_rate=kampita.sample_rate).segmentation_
    assert seg.C == 2


def test_segmenter_requires_tonic(kampita):
    with pytest.raises(ValueError):
        CPNoteSegmenter().fit(kampita)


def test_nonuniform(kampita):
    est = NonUniformSlowdown(factor=2, tonic_hz=125.0).fit(kampita)
    assert 1.0 < est.effective_factor_ < 2.0
    y = est.transform(kampita)
    assert len(y) == est.plan_.out_n_frames * est.segmenter_.grid_.frame_len_samples
    other = AudioBuffer(kampita.samples.copy(), kampita.sample_rate)
    with pytest.raises(ValueError):
        est.transform(other)


def test_nonuniform_uses_given_segmenter(kampita):
    seg = CPNoteSegmenter(tonic_hz=100.0, snap=False)
    est = NonUniformSlowdown(factor=3, tonic_hz=125.0, segmenter=seg).fit(kampita)
    assert est.segmenter_.tonic_hz == 125.0 and est.segmenter_.snap is False
    assert not hasattr(seg, "segmentation_")


def test_uniform(pure_tone):
    y = UniformSlowdown(factor=1.5).fit().transform(pure_tone)
    assert len(y) == round(1.5 * len(pure_tone))
    with pytest.raises(ValueError):
        UniformSlowdown(factor=0.5).fit()
