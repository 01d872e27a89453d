import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.io import wavfile

from leaf_apcen import signal_io as sio
from leaf_apcen.errors import AliasRisk, BadMagic, ConfigInvalid, CorruptHeader, DimensionOverflow, UnsupportedFormat


def test_read_pcm16_one_second(tmp_path):
    path = tmp_path / "a.wav"
    wavfile.write(path, 16000, np.zeros(16000, dtype=np.int16))
    clip = sio.read_wav(path)
    assert len(clip) == 16000 and clip.sample_rate == 16000


def test_most_negative_code_is_minus_one(tmp_path):
    path = tmp_path / "a.wav"
    wavfile.write(path, 16000, np.array([-32768, 0, 32767], dtype=np.int16))
    assert sio.read_wav(path).samples[0] == -1.0


def test_float32_input_accepted(tmp_path):
    path = tmp_path / "f.wav"
    x = np.linspace(-0.5, 0.5, 1000, dtype=np.float32)
    wavfile.write(path, 16000, x)
    np.testing.assert_array_equal(sio.read_wav(path).samples, x.astype(np.float64))


def test_wrong_rate_rejected(tmp_path):
    path = tmp_path / "a.wav"
    wavfile.write(path, 44100, np.zeros(100, dtype=np.int16))
    with pytest.raises(UnsupportedFormat, match="sample_rate 44100"):
        sio.read_wav(path)


def test_stereo_rejected(tmp_path):
    path = tmp_path / "a.wav"
    wavfile.write(path, 16000, np.zeros((100, 2), dtype=np.int16))
    with pytest.raises(UnsupportedFormat):
        sio.read_wav(path)


def test_garbage_rejected(tmp_path):
    path = tmp_path / "a.wav"
    path.write_bytes(b"not a wave file at all")
    with pytest.raises(CorruptHeader):
        sio.read_wav(path)


def test_sine_round_trip_within_one_step(tmp_path):
    clip = sio.synth_clip("sine", frequency=1000.0, amplitude=0.5)
    path = tmp_path / "s.wav"
    assert sio.write_wav(clip, path) == 0
    back = sio.read_wav(path)
    assert np.max(np.abs(back.samples - clip.samples)) <= 1 / 32768


def test_over_range_sample_clamped_and_counted(tmp_path):
    path = tmp_path / "c.wav"
    n = sio.write_wav(sio.AudioClip(np.array([0.0, 1.5, -0.25])), path)
    assert n == 1
    assert sio.read_wav(path).samples[1] == 32767 / 32768


def test_empty_clip_writes_valid_file(tmp_path):
    path = tmp_path / "e.wav"
    sio.write_wav(sio.AudioClip(np.zeros(0)), path)
    assert len(sio.read_wav(path)) == 0


@given(arrays(np.float64, st.integers(0, 300), elements=st.floats(-1.0, 1.0)))
def test_wav_round_trip_property(tmp_path_factory, x):
    path = tmp_path_factory.mktemp("w") / "p.wav"
    sio.write_wav(sio.AudioClip(x), path)
    back = sio.read_wav(path).samples
    assert back.shape == x.shape
    assert np.all(np.abs(back - x) <= 1 / 32768)


def test_feature_file_size_and_round_trip(tmp_path, rng):
    m = rng.random((100, 40)).astype(np.float32)
    path = tmp_path / "m.apcn"
    sio.save_features(m, path)
    assert path.stat().st_size == 28 + 16000
    back = sio.load_features(path)
    assert back.values.dtype == np.float32
    assert back.values.tobytes() == m.tobytes()
    assert (back.sample_rate, back.hop, back.kind) == (16000, 160, sio.KIND_FEATURE)


def test_feature_header_layout(tmp_path):
    path = tmp_path / "m.apcn"
    sio.save_features(np.zeros((3, 2)), path, kind=sio.KIND_ENERGY)
    magic, ver, n_ch, n_fr, sr, hop, kind, reserved = struct.unpack_from("<4sHHIIIII", path.read_bytes())
    assert (magic, ver, n_ch, n_fr, sr, hop, kind, reserved) == (b"APCN", 1, 2, 3, 16000, 160, 0, 0)


@given(arrays(np.float32, st.tuples(st.integers(0, 20), st.integers(1, 8)),
              elements=st.floats(width=32, allow_nan=False, allow_infinity=False, allow_subnormal=True)))  # fmt: skip
def test_feature_round_trip_bit_exact_property(tmp_path_factory, m):
    path = tmp_path_factory.mktemp("f") / "m.apcn"
    sio.save_features(m, path)
    assert sio.load_features(path).values.tobytes() == np.ascontiguousarray(m).tobytes()


def test_bad_magic(tmp_path):
    path = tmp_path / "m.apcn"
    sio.save_features(np.zeros((2, 2)), path)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"XXXX"
    path.write_bytes(bytes(raw))
    with pytest.raises(BadMagic):
        sio.load_features(path)


def test_truncated_payload(tmp_path):
    path = tmp_path / "m.apcn"
    sio.save_features(np.zeros((4, 2)), path)
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(CorruptHeader):
        sio.load_features(path)


def test_too_many_channels():
    with pytest.raises(DimensionOverflow):
        sio.save_features(np.zeros((1, 70000)), "/nonexistent/never-written")


def test_csv_export(tmp_path, rng):
    m = rng.random((100, 40))
    path = tmp_path / "m.csv"
    sio.save_features_csv(m, path)
    lines = path.read_text().strip().split("\n")
    assert len(lines) == 100
    assert all(len(line.split(",")) == 40 for line in lines)
    np.testing.assert_allclose(np.loadtxt(path, delimiter=","), m, rtol=1e-8)


def test_sine_rms():
    clip = sio.synth_clip("sine", frequency=1000.0, amplitude=0.5, duration=1.0)
    assert len(clip) == 16000
    assert abs(np.sqrt(np.mean(clip.samples**2)) - 0.5 / np.sqrt(2)) < 1e-3


def test_silence_is_zero():
    assert not np.any(sio.synth_clip("silence").samples)


@pytest.mark.parametrize("kind", sio.SYNTH_KINDS)
def test_synth_deterministic_and_peak(kind):
    a = sio.synth_clip(kind, seed=7, amplitude=0.3)
    b = sio.synth_clip(kind, seed=7, amplitude=0.3)
    np.testing.assert_array_equal(a.samples, b.samples)
    if kind != "silence":
        assert np.max(np.abs(a.samples)) == pytest.approx(0.3, rel=1e-2)


def test_white_noise_seed_changes_output():
    a = sio.synth_clip("white_noise", seed=7).samples
    b = sio.synth_clip("white_noise", seed=8).samples
    assert not np.array_equal(a, b)


def test_alias_risk():
    with pytest.raises(AliasRisk):
        sio.synth_clip("sine", frequency=8000.0)


def test_manifest_round_trip(tmp_path):
    rows = [sio.ManifestRow("a.wav", 0, "train", "clean"), sio.ManifestRow("b.wav", 1, "test", "babble")]
    path = tmp_path / "manifest.csv"
    sio.write_manifest(rows, path)
    assert sio.read_manifest(path, check_files=False) == rows


def test_manifest_labels_must_be_contiguous(tmp_path):
    path = tmp_path / "manifest.csv"
    sio.write_manifest([sio.ManifestRow("a.wav", 0, "train"), sio.ManifestRow("b.wav", 3, "train")], path)
    with pytest.raises(ConfigInvalid):
        sio.read_manifest(path, check_files=False)


def test_manifest_missing_file(tmp_path):
    path = tmp_path / "manifest.csv"
    sio.write_manifest([sio.ManifestRow("a.wav", 0, "train")], path)
    with pytest.raises(FileNotFoundError):
        sio.read_manifest(path)
