import numpy as np
import pytest
from scipy.io import wavfile

from siib.channel_sim import synthetic_speech

ACCEPTANCE_RESULTS = []


@pytest.fixture(scope="session")
def speech60():
    return synthetic_speech(60.0, seed=1)


@pytest.fixture(scope="session")
def speech30():
    return synthetic_speech(30.0, seed=2)


@pytest.fixture
def write_wav(tmp_path):
    """Write ``samples`` (any dtype scipy accepts) and return the path."""

    def _write(name, samples, rate=16000):
        path = tmp_path / name
        wavfile.write(str(path), rate, np.asarray(samples))
        return path

    return _write


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, status, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"[{status}] {number:>2}. {name}: {detail}")
