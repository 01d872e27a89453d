import filecmp

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from leaf_apcen import augmentation as aug
from leaf_apcen import signal_io as sio
from leaf_apcen.errors import ClipTooShort, ConfigInvalid, PoolTooSmall, SilentClip

POOL = aug.NoisePool.synthetic(seed=0)


def _rms_clip(rms, n=16000, seed=0):
    x = np.random.default_rng(seed).normal(size=n)
    return sio.AudioClip(x * rms / np.sqrt(np.mean(x * x)))


def test_square_wave_level():
    x = np.where(np.arange(1600) % 40 < 20, 1.0, -1.0)
    assert aug.measure_rms_dbfs(sio.AudioClip(x)) == pytest.approx(0.0, abs=1e-12)


def test_sine_level():
    clip = sio.synth_clip("sine", frequency=1000.0, amplitude=1.0)
    assert aug.measure_rms_dbfs(clip) == pytest.approx(-3.0103, abs=1e-4)


def test_silent_level():
    with pytest.raises(SilentClip):
        aug.measure_rms_dbfs(sio.AudioClip(np.zeros(100)))


def test_equal_power_zero_db():
    m = aug.mix_at_snr(_rms_clip(0.1, seed=1), _rms_clip(0.1, seed=2), 0.0)
    assert m.noise_gain == pytest.approx(1.0, rel=1e-12)


def test_fifteen_db_gain():
    m = aug.mix_at_snr(_rms_clip(0.1, seed=1), _rms_clip(0.1, seed=2), 15.0)
    assert m.noise_gain == pytest.approx(10 ** (-15 / 20), rel=1e-12)
    assert m.noise_gain == pytest.approx(0.17783, abs=1e-5)


@given(st.floats(-10.0, 30.0), st.integers(0, 2**31))
def test_snr_reconstructed(snr, seed):
    m = aug.mix_at_snr(_rms_clip(0.2, seed=seed % 97), _rms_clip(0.05, 5000, seed=seed % 89 + 1), snr, seed)
    assert abs(m.snr_db - snr) < 1e-9
    np.testing.assert_allclose(m.clip.samples, m.clean + m.noise, atol=1e-15)


def test_loud_mix_peak_normalized():
    m = aug.mix_at_snr(_rms_clip(0.8, seed=1), _rms_clip(0.8, seed=2), 0.0)
    assert m.peak_factor < 1.0
    assert np.max(np.abs(m.clip.samples)) <= 1.0
    assert abs(m.snr_db) < 1e-9


def test_mix_rejects_silence():
    with pytest.raises(SilentClip):
        aug.mix_at_snr(_rms_clip(0.1), sio.AudioClip(np.zeros(100)), 5.0)


def test_fit_length_loops_and_crops(rng):
    x = np.arange(10.0)
    looped = aug.fit_length(x, 25, rng)
    assert looped.size == 25
    assert np.all(np.diff(looped) % 10 == 1)  # contiguous modulo wrap
    assert aug.fit_length(x, 4, rng).size == 4


def test_babble_uses_all_of_three_and_normalizes():
    pool = aug.NoisePool(POOL.speech[:3], [])
    b = aug.make_babble(pool, 1.0, seed=3)
    assert np.sqrt(aug.mean_square(b)) == pytest.approx(0.1, abs=1e-6)
    np.testing.assert_array_equal(b.samples, aug.make_babble(pool, 1.0, seed=3).samples)
    assert not np.array_equal(b.samples, aug.make_babble(pool, 1.0, seed=4).samples)


def test_babble_pool_too_small():
    with pytest.raises(PoolTooSmall):
        aug.make_babble(aug.NoisePool(POOL.speech[:2], []), 1.0)


def test_pool_round_trip(tmp_path):
    POOL.save(tmp_path)
    back = aug.NoisePool.from_dir(tmp_path)
    assert len(back.speech) == len(POOL.speech) and len(back.music) == len(POOL.music)


def test_empty_pool_dir(tmp_path):
    with pytest.raises(PoolTooSmall):
        aug.NoisePool.from_dir(tmp_path)


def test_segments_of_one_second():
    assert len(aug.segment_bounds(16000, 4000)) == 4


def test_loudness_levels_in_window_over_100_clips():
    spec = aug.AugmentSpec(kind="loudness")
    rng = np.random.default_rng(0)
    for k in range(100):
        kind = ("am_noise", "white_noise", "tone_complex", "am_tone")[k % 4]
        clip = sio.synth_clip(kind, amplitude=float(10 ** rng.uniform(-2.5, 0)), duration=float(rng.uniform(1, 3)),
                              seed=k, frequency=float(rng.uniform(100, 4000)))  # fmt: skip
        res = aug.loudness_modulate(clip, spec, seed=k)
        levels = aug.segment_levels_dbfs(res.clip)
        levels = levels[np.isfinite(aug.segment_levels_dbfs(clip))]  # silent input segments stay silent
        assert np.all(levels >= -40.0) and np.all(levels <= -15.0), (k, levels)
        assert np.max(np.abs(res.clip.samples)) <= 1.0


def test_loudness_crossfade_regions():
    clip = sio.synth_clip("white_noise", amplitude=0.1, duration=1.0, seed=1)
    res = aug.loudness_modulate(clip, aug.AugmentSpec(kind="loudness"), seed=2)
    env = res.clip.samples / clip.samples
    assert len(res.gains_db) == 4
    # ramps of 80 samples start at every segment boundary after the first
    for b in (4000, 8000, 12000):
        ramp = env[b : b + 80]
        g0, g1 = env[b - 1], env[b + 80]
        assert np.all(np.diff(ramp) * np.sign(g1 - g0) >= -1e-12)


def test_loudness_identity_gain():
    clip = sio.synth_clip("white_noise", amplitude=0.1, duration=1.0, seed=1)
    levels = aug.segment_levels_dbfs(clip)
    assert np.all((levels > -40) & (levels < -15))
    spec = aug.AugmentSpec(kind="loudness", gain_range_db=(0.0, 0.0))
    out = aug.loudness_modulate(clip, spec, seed=0).clip.samples
    assert np.max(np.abs(out - clip.samples)) <= 1e-12


def test_loudness_errors():
    with pytest.raises(SilentClip):
        aug.loudness_modulate(sio.AudioClip(np.zeros(8000)))
    with pytest.raises(ClipTooShort):
        aug.loudness_modulate(sio.AudioClip(np.ones(100) * 0.1))


def test_bad_spec():
    with pytest.raises(ConfigInvalid):
        aug.AugmentSpec(kind="reverb")
    with pytest.raises(ConfigInvalid):
        aug.AugmentSpec(snr_range_db=(10.0, 0.0))


@pytest.mark.parametrize("kind", aug.CONDITIONS)
def test_augment_clip_deterministic(kind):
    clip = sio.synth_clip("am_tone", amplitude=0.3)
    spec = aug.AugmentSpec(kind=kind)
    a, info = aug.augment_clip(clip, spec, POOL, seed=5, index=3)
    b, _ = aug.augment_clip(clip, spec, POOL, seed=5, index=3)
    np.testing.assert_array_equal(a.samples, b.samples)
    if kind in ("babble", "music"):
        assert 0.0 <= info["snr_db"] <= 15.0


def _rows(n_per_class, n_classes, splits=("train",)):
    return [sio.ManifestRow(f"{s}/{c}_{k}.wav", c, s) for s in splits for c in range(n_classes)
            for k in range(n_per_class)]  # fmt: skip


def test_assignment_eight_clips_two_classes():
    conds = aug.assign_conditions(_rows(4, 2), seed=0)
    for c in range(2):
        assert sorted(conds[4 * c : 4 * c + 4]) == sorted(aug.CONDITIONS)


def test_assignment_balance_large():
    rows = _rows(500, 2)
    conds = aug.assign_conditions(rows, seed=1)
    for c in range(2):
        counts = [sum(1 for r, k in zip(rows, conds) if r.label == c and k == cond) for cond in aug.CONDITIONS]
        assert max(counts) - min(counts) <= 1 and abs(counts[0] - 125) <= 1


@given(st.integers(1, 13), st.integers(0, 2**31))
def test_assignment_balance_property(n, seed):
    rows = _rows(n, 3, ("train", "val", "test"))
    conds = aug.assign_conditions(rows, seed)
    for c in range(3):
        mine = [k for r, k in zip(rows, conds) if r.label == c]
        counts = [mine.count(cond) for cond in aug.CONDITIONS]
        assert max(counts) - min(counts) <= 1


def _clean_corpus(root, n=4, classes=2):
    rows = []
    (root / "train").mkdir(parents=True)
    for c in range(classes):
        for k in range(n):
            rel = f"train/{c}_{k}.wav"
            sio.write_wav(sio.synth_clip("am_tone", frequency=500.0 * (c + 1), amplitude=0.2, seed=k), root / rel)
            rows.append(sio.ManifestRow(rel, c, "train"))
    sio.write_manifest(rows, root / "manifest.csv")
    return root / "manifest.csv"


def test_build_corpus_deterministic(tmp_path):
    manifest = _clean_corpus(tmp_path / "clean")
    a = aug.build_corpus(manifest, POOL, tmp_path / "a", seed=9)
    aug.build_corpus(manifest, POOL, tmp_path / "b", seed=9)
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert len(files) == 9
    match, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", [str(f) for f in files], shallow=False)
    assert not mismatch and not errors
    for c in range(2):
        assert sorted(r.condition for r in a if r.label == c) == sorted(aug.CONDITIONS)
    assert sio.read_manifest(tmp_path / "a" / "manifest.csv") == a
