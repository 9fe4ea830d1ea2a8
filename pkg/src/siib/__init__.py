"""Speech intelligibility in bits (SIIB).

An intrusive intelligibility metric: the information rate, in bits per
second, shared by a clean speech signal and its degraded version.

>>> from siib import load_audio, siib
>>> score = siib(load_audio("clean.wav"), load_audio("degraded.wav"))  # doctest: +SKIP
>>> score.bits_per_second  # doctest: +SKIP
"""

__version__ = "0.1.0"

from .audio_io import AudioSignal, align_pair, load_audio, resample, save_audio
from .core import SiibConfig, SiibScore, production_channel_cap, siib
from .errors import AudioIOError, SiibError, ValidationError

__all__ = [
    "AudioIOError",
    "AudioSignal",
    "SiibConfig",
    "SiibError",
    "SiibScore",
    "ValidationError",
    "align_pair",
    "load_audio",
    "production_channel_cap",
    "resample",
    "save_audio",
    "siib",
]
