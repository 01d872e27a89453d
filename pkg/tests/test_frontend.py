import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from leaf_apcen import signal_io as sio
from leaf_apcen.errors import ClipTooShort, ConfigInvalid
from leaf_apcen.frontend import (
    FrontendConfig,
    decompose,
    decompose_direct,
    design_filterbank,
    energy_map,
    hz_to_mel,
    pool,
)

from oracles import brute_detection, gaussian_centre_weight, mel_centres

FB = design_filterbank()


def test_default_config():
    c = FrontendConfig()
    assert (c.n_filters, c.hop, c.sample_rate, c.upper_freq) == (40, 160, 16000, 8000.0)
    assert c.gabor_size == 151 and c.pool_size == 151


def test_mel_anchor():
    assert hz_to_mel(8000.0) == pytest.approx(2840.03, abs=1e-2)


def test_first_centre_frequency():
    assert FB.center_freqs[0] == pytest.approx(44.4, abs=0.05)
    np.testing.assert_allclose(FB.center_freqs, mel_centres(40, 0, 8000), rtol=1e-12)


def test_centres_increasing_and_in_band():
    assert np.all(np.diff(FB.center_freqs) > 0)
    assert 0 < FB.center_freqs[0] and FB.center_freqs[-1] < 8000
    assert len(np.unique(FB.center_freqs)) == 40


def test_single_filter_centre():
    fb = design_filterbank(FrontendConfig(n_filters=1, f_min=1000.0, f_max=3000.0))
    assert fb.center_freqs[0] == pytest.approx(mel_centres(1, 1000, 3000)[0], rel=1e-12)


def test_sigmas_positive_and_envelopes_normalized():
    assert np.all(FB.sigmas > 0) and np.all(np.isfinite(FB.sigmas))
    from scipy.integrate import quad

    for i in (0, 19, 39):
        total, _ = quad(lambda t: FB.envelope(i, t), -np.inf, np.inf)
        assert total == pytest.approx(1.0, abs=1e-6)


def test_filterbank_immutable():
    with pytest.raises(ValueError):
        FB.kernels[0, 0] = 0


@pytest.mark.parametrize("kw", [dict(n_filters=0), dict(hop=0), dict(f_min=5000.0, f_max=4000.0),
                                dict(f_max=9000.0)])  # fmt: skip
def test_invalid_configs(kw):
    with pytest.raises(ConfigInvalid):
        FrontendConfig(**kw)


def test_silence_detection_zero():
    assert not np.any(decompose(np.zeros(1600), FB))


def test_too_short():
    with pytest.raises(ClipTooShort):
        decompose(np.zeros(100), FB)


def test_fft_path_matches_direct():
    x = np.random.default_rng(3).normal(size=1600)
    fast, slow = decompose(x, FB), decompose_direct(x, FB)
    assert np.max(np.abs(fast - slow)) / np.max(np.abs(slow)) < 1e-10


def test_detection_matches_brute_force_oracle():
    fe = FrontendConfig(n_filters=4, kernel_len=31)
    fb = design_filterbank(fe)
    x = np.random.default_rng(4).normal(size=200)
    det = decompose(x, fb)
    for i in range(4):
        ref = brute_detection(list(x), fb.center_freqs[i], fb.sigmas[i], 31, 16000)
        np.testing.assert_allclose(det[i], ref, rtol=1e-9, atol=1e-14)


def test_sine_at_centre_wins_brute_force_oracle():
    """0.1 s sine at eta_20 through the plain-Python convolution."""
    fb = FB
    x = sio.synth_clip("sine", frequency=fb.center_freqs[19], duration=0.1).samples
    means = {i: np.mean(brute_detection(list(x), fb.center_freqs[i], fb.sigmas[i], 151, 16000)) for i in (4, 19, 34)}
    assert means[19] > means[4] and means[19] > means[34]
    fast = decompose(x, fb).mean(axis=1)
    assert fast[19] > fast[4] and fast[19] > fast[34]


@given(st.floats(1e-3, 1e3))
def test_detection_scales_quadratically(c):
    x = np.random.default_rng(5).normal(size=400)
    np.testing.assert_allclose(decompose(c * x, FB), c**2 * decompose(x, FB), rtol=1e-9, atol=0)


def test_constant_detection_pools_to_constant():
    det = np.full((3, 16000), 2.5)
    E = pool(det, FrontendConfig(n_filters=3))
    # frames whose kernel lies inside the clip
    np.testing.assert_allclose(E[1:-1], 2.5, rtol=1e-12)


def test_impulse_pooling():
    det = np.zeros((1, 16000))
    det[0, 0] = 1.0
    E = pool(det, FrontendConfig(n_filters=1))
    assert E[0, 0] == pytest.approx(gaussian_centre_weight(151), rel=1e-12)
    assert E[1, 0] == 0.0


def test_frame_count():
    assert energy_map(np.zeros(16000), FB).shape == (100, 40)
    assert energy_map(np.zeros(16001), FB).shape == (101, 40)


def test_batched_energy_matches_single():
    x = np.random.default_rng(6).normal(size=(3, 3200))
    batched = energy_map(x, FB)
    for b in range(3):
        np.testing.assert_allclose(batched[b], energy_map(x[b], FB), rtol=1e-12, atol=1e-300)


@given(st.floats(0.01, 100.0), st.integers(0, 2**31))
def test_energy_homogeneity_and_nonnegativity(c, seed):
    x = np.random.default_rng(seed).normal(size=800)
    E = energy_map(x, FB)
    assert np.all(E >= 0) and np.all(np.isfinite(E))
    np.testing.assert_allclose(energy_map(c * x, FB), c**2 * E, rtol=1e-9, atol=1e-300)


@pytest.mark.parametrize("i", [5, 20, 35])
def test_frequency_selectivity(i):
    x = sio.synth_clip("sine", frequency=FB.center_freqs[i - 1], duration=1.0).samples
    assert int(np.argmax(energy_map(x, FB).mean(axis=0))) + 1 == i
