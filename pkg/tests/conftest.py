import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from leaf_apcen import signal_io as sio

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tone_wav(tmp_path):
    path = tmp_path / "tone.wav"
    sio.write_wav(sio.synth_clip("am_tone", frequency=1000.0, duration=1.0), path)
    return path


@pytest.fixture
def silence_wav(tmp_path):
    path = tmp_path / "silence.wav"
    sio.write_wav(sio.synth_clip("silence", duration=1.0), path)
    return path
