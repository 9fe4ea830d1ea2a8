import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from siib.audio_io import (
    AudioSignal,
    LengthMismatchWarning,
    align_pair,
    load_audio,
    resample,
    save_audio,
)
from siib.errors import AudioIOError, ValidationError


def test_load_16bit_mono(write_wav):
    data = (np.sin(np.arange(48000) * 0.01) * 20000).astype(np.int16)
    sig = load_audio(write_wav("a.wav", data, 48000))
    assert len(sig) == 48000
    assert sig.sample_rate == 48000
    np.testing.assert_array_equal(sig.samples, data / 32768.0)


def test_stereo_identical_channels_average(write_wav):
    data = np.full((1000, 2), 0.5, dtype=np.float32)
    sig = load_audio(write_wav("s.wav", data))
    np.testing.assert_array_equal(sig.samples, 0.5)


@pytest.mark.parametrize("dtype,scale", [
    (np.uint8, None), (np.int16, 2**15), (np.int32, 2**31), (np.float32, 1), (np.float64, 1),
])
def test_encodings_normalized(write_wav, dtype, scale):
    x = np.linspace(-0.9, 0.9, 501)
    if dtype == np.uint8:
        raw = np.round(x * 128 + 128).astype(np.uint8)
        expected = (raw.astype(float) - 128) / 128
    elif scale == 1:
        raw = x.astype(dtype)
        expected = raw.astype(float)
    else:
        raw = np.round(x * scale).astype(dtype)
        expected = raw / scale
    sig = load_audio(write_wav("e.wav", raw))
    np.testing.assert_allclose(sig.samples, expected, atol=1e-12)
    assert np.max(np.abs(sig.samples)) <= 1.0


def test_corrupt_header(tmp_path):
    path = tmp_path / "bad.wav"
    path.write_bytes(b"RIFF\x10\x00\x00\x00WAVEfmt ")
    with pytest.raises(AudioIOError, match="unreadable file"):
        load_audio(path)


def test_missing_file(tmp_path):
    with pytest.raises(AudioIOError, match="unreadable file"):
        load_audio(tmp_path / "nope.wav")


def test_zero_length(write_wav):
    with pytest.raises(ValidationError, match="zero-length"):
        load_audio(write_wav("z.wav", np.zeros(0, dtype=np.int16)))


def test_save_roundtrip(tmp_path):
    sig = AudioSignal(np.linspace(-1, 1, 333), 16000)
    save_audio(tmp_path / "o.wav", sig)
    back = load_audio(tmp_path / "o.wav")
    np.testing.assert_allclose(back.samples, sig.samples, atol=1e-7)


def test_signal_invariants():
    with pytest.raises(ValidationError):
        AudioSignal([0.0, np.nan], 16000)
    with pytest.raises(ValidationError):
        AudioSignal([0.0], 0)


def test_resample_length():
    out = resample(AudioSignal(np.random.default_rng(0).standard_normal(48000), 48000), 16000)
    assert out.sample_rate == 16000
    assert abs(len(out) - 16000) <= 1


def test_resample_sine_matches_analytic():
    t48 = np.arange(48000) / 48000
    out = resample(AudioSignal(np.sin(2 * np.pi * 1000 * t48), 48000), 16000)
    t16 = np.arange(len(out)) / 16000
    err = np.abs(out.samples - np.sin(2 * np.pi * 1000 * t16))[100:-100]
    assert err.max() < 1e-3


def test_resample_identity_is_same_object():
    sig = AudioSignal(np.arange(10.0), 16000)
    assert resample(sig, 16000) is sig


def test_resample_stopband():
    # 9 kHz is above the 8 kHz output Nyquist frequency
    t = np.arange(48000) / 48000
    out = resample(AudioSignal(np.sin(2 * np.pi * 9000 * t), 48000), 16000)
    assert np.sqrt(np.mean(out.samples[200:-200] ** 2)) < 10 ** (-60 / 20)


@pytest.mark.parametrize("r2", [22050, 44100, 11025])
def test_resample_roundtrip(r2):
    fs = 16000
    t = np.arange(2 * fs) / fs
    x = np.sin(2 * np.pi * 300 * t) + 0.5 * np.sin(2 * np.pi * 1234 * t + 1)
    # components must sit below min(fs, r2)/2 minus the transition band
    if min(fs, r2) > 12000:
        x += 0.3 * np.sin(2 * np.pi * 5000 * t)
    sig = AudioSignal(x, fs)
    back = resample(resample(sig, r2), fs)
    n = min(len(back), len(sig))
    err = np.abs(back.samples[:n] - x[:n])[300:-300]
    assert err.max() < 1e-3


def test_align_identity():
    a = AudioSignal(np.ones(16000), 16000)
    b = AudioSignal(np.ones(16000), 16000)
    assert align_pair(a, b) == (a, b)


def test_align_truncates_without_warning_under_one_percent():
    a = AudioSignal(np.ones(16000), 16000)
    b = AudioSignal(np.ones(15990), 16000)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ca, cb = align_pair(a, b)
    assert len(ca) == len(cb) == 15990


def test_align_warns_on_large_mismatch():
    with pytest.warns(LengthMismatchWarning):
        align_pair(AudioSignal(np.ones(1000), 16000), AudioSignal(np.ones(900), 16000))


def test_align_rate_mismatch():
    with pytest.raises(ValidationError, match="sample-rate mismatch"):
        align_pair(AudioSignal(np.ones(10), 16000), AudioSignal(np.ones(10), 8000))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 500), st.integers(1, 500))
def test_align_equal_lengths(n1, n2):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LengthMismatchWarning)
        a, b = align_pair(AudioSignal(np.ones(n1), 8000), AudioSignal(np.ones(n2), 8000))
    assert len(a) == len(b) == min(n1, n2)
