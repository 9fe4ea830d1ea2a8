import json
import math
import warnings

import numpy as np
import pytest

from siib import core, features
from siib.audio_io import AudioSignal
from siib.channel_sim import synthetic_speech, white_noise
from siib.core import SiibConfig, production_channel_cap, score_from_mi, siib
from siib.errors import ValidationError


def test_cap_values():
    assert production_channel_cap(0.0) == 0.0
    assert production_channel_cap(0.75) == pytest.approx(-0.5 * math.log2(0.4375), abs=1e-12)
    assert production_channel_cap(0.75) == pytest.approx(0.596322, abs=1e-6)
    for bad in (1.0, -0.1, 1.5):
        with pytest.raises(ValidationError):
            production_channel_cap(bad)


def test_config_derived_values():
    cfg = SiibConfig()
    assert cfg.frame_rate == 80.0
    assert cfg.max_score == pytest.approx(1335.76, abs=0.01)
    with pytest.raises(ValidationError):
        SiibConfig(r=1.0)
    with pytest.raises(ValidationError):
        SiibConfig(stack=0)


def test_config_digest_and_mapping():
    cfg = SiibConfig()
    assert cfg.digest() == SiibConfig().digest()
    assert SiibConfig(seed=1).digest() != cfg.digest()
    assert SiibConfig.from_mapping({"stack": 10, "r": None}) == SiibConfig(stack=10)
    assert SiibConfig.from_mapping({"hop": 160.0}).hop == 160
    with pytest.raises(ValidationError, match="unknown"):
        SiibConfig.from_mapping({"bogus": 1})


def test_score_from_mi_clamps():
    cfg = SiibConfig(num_filters=2, stack=1)
    cap = cfg.cap_bits
    score = score_from_mi([-0.3, 5.0], cfg)
    assert score.bits_per_second == pytest.approx(80.0 * cap)
    assert score.per_dimension_capped == [False, True]
    assert score.per_dimension_mi == [-0.3, 5.0]


def test_score_json_roundtrip():
    score = score_from_mi([0.1, 0.2], SiibConfig(num_filters=2, stack=1))
    data = json.loads(score.to_json())
    assert data["bits_per_second"] == score.bits_per_second
    assert set(data) >= {"cap_bits", "per_dimension_mi", "capped", "config_digest"}


def test_identical_input_hits_ceiling(speech30):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", features.ShortInputWarning)
        score = siib(speech30, speech30)
    assert abs(score.bits_per_second - SiibConfig().max_score) < 0.1
    assert all(score.per_dimension_capped)
    assert len(score.per_dimension_mi) == 420


def test_scale_invariance_and_determinism(speech30):
    noise = white_noise(speech30, seed=3).samples
    deg = speech30.with_samples(speech30.samples + 0.05 * noise)
    base = siib(speech30, deg).bits_per_second
    assert siib(speech30, deg).bits_per_second == base
    for gain in (0.1, 10.0):
        scaled = deg.with_samples(gain * deg.samples)
        assert abs(siib(speech30, scaled).bits_per_second - base) < 1e-6
    assert 0 <= base <= SiibConfig().max_score


def test_klt_fitted_once_on_clean(monkeypatch, speech30):
    calls = []
    real = features.fit_klt

    def spy(stacked, *args, **kwargs):
        calls.append(stacked)
        return real(stacked, *args, **kwargs)

    monkeypatch.setattr(features, "fit_klt", spy)
    deg = speech30.with_samples(speech30.samples + white_noise(speech30, seed=1).samples)
    Xt, Yt, basis = core.transformed_features(speech30, deg)
    assert len(calls) == 1
    # eigenvalues are the variances of the clean projections
    cov = np.cov(Xt.vectors, rowvar=False)
    np.testing.assert_allclose(np.diag(cov), basis.eigenvalues, rtol=1e-8, atol=1e-10)


@pytest.mark.filterwarnings("ignore::siib.features.ShortInputWarning")
def test_too_short_raises():
    short = synthetic_speech(0.1, seed=0, pause_probability=0.0)
    with pytest.raises(ValidationError):
        siib(short, short)


def test_short_input_warns():
    x = synthetic_speech(3.0, seed=4)
    with pytest.warns(features.ShortInputWarning):
        siib(x, x)


def test_resamples_other_rates():
    x = synthetic_speech(3.0, sample_rate=8000, seed=5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        score = siib(x, x)
    assert score.frame_rate == 80.0
    assert score.bits_per_second > 0.9 * SiibConfig().max_score


def test_silent_degraded_scores_near_zero(speech30):
    silent = AudioSignal(np.zeros(len(speech30)), speech30.sample_rate)
    score = siib(speech30, silent)
    assert score.bits_per_second < 1.0
