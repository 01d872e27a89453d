"""Fixed LEAF spectral decomposition.

Complex Gabor filters centred on a mel grid, squared-modulus detection and a
Gaussian low-pass pooling stage decimated to the hop size. Nothing here is
trainable; a :class:`GaborFilterbank` is immutable once designed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

from .errors import ClipTooShort, ConfigInvalid


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def _odd(n: int) -> int:
    return n if n % 2 else n + 1


@dataclass(frozen=True)
class FrontendConfig:
    n_filters: int = 40
    kernel_len: int = 150
    pool_len: int | None = None  # defaults to kernel_len
    sample_rate: int = 16000
    hop: int = 160
    window: int = 400  # nominal 25 ms framing, not used by the DSP
    f_min: float = 0.0
    f_max: float | None = None  # None resolves to Nyquist

    def __post_init__(self):
        if self.f_max is None:
            object.__setattr__(self, "f_max", self.sample_rate / 2)
        if self.n_filters < 1:
            raise ConfigInvalid("n_filters must be >= 1")
        if self.kernel_len < 1 or (self.pool_len is not None and self.pool_len < 1):
            raise ConfigInvalid("kernel lengths must be >= 1")
        if self.hop < 1:
            raise ConfigInvalid("hop must be >= 1")
        if not 0 <= self.f_min < self.upper_freq <= self.sample_rate / 2:
            raise ConfigInvalid(
                f"need 0 <= f_min < f_max <= {self.sample_rate / 2}, "
                f"got f_min={self.f_min}, f_max={self.upper_freq}"
            )

    @property
    def upper_freq(self) -> float:
        return self.sample_rate / 2 if self.f_max is None else float(self.f_max)

    @property
    def gabor_size(self) -> int:
        return _odd(self.kernel_len)

    @property
    def pool_size(self) -> int:
        return _odd(self.kernel_len if self.pool_len is None else self.pool_len)

    @property
    def pool_sigma(self) -> float:
        return 0.4 * self.pool_size / 2

    def n_frames(self, n_samples: int) -> int:
        return -(-n_samples // self.hop)


@dataclass(frozen=True)
class GaborFilterbank:
    config: FrontendConfig
    center_freqs: np.ndarray  # Hz
    sigmas: np.ndarray  # samples
    kernels: np.ndarray = field(repr=False)  # (N, L) complex
    pool_kernel: np.ndarray = field(repr=False)  # (L_pool,) real, sums to 1
    _spectra: dict = field(default_factory=dict, repr=False, compare=False)

    def kernel_spectra(self, nfft: int) -> np.ndarray:
        """FFT of the time-reversed kernels at length ``nfft`` (cached)."""
        if nfft not in self._spectra:
            spec = sfft.fft(self.kernels[:, ::-1], nfft, axis=-1)
            spec.setflags(write=False)
            self._spectra[nfft] = spec
        return self._spectra[nfft]

    @property
    def n_filters(self) -> int:
        return self.center_freqs.shape[0]

    @property
    def taps(self) -> np.ndarray:
        half = (self.kernels.shape[1] - 1) // 2
        return np.arange(-half, half + 1, dtype=np.float64)

    def envelope(self, i: int, t):
        """Continuous Gaussian envelope of filter ``i``; integrates to one over the real line."""
        s = self.sigmas[i]
        t = np.asarray(t, dtype=np.float64)
        return np.exp(-(t**2) / (2 * s**2)) / (np.sqrt(2 * np.pi) * s)


def mel_breakpoints(config: FrontendConfig) -> np.ndarray:
    """The N+2 mel-spaced edge/centre frequencies in Hz."""
    mels = np.linspace(hz_to_mel(config.f_min), hz_to_mel(config.upper_freq), config.n_filters + 2)
    return mel_to_hz(mels)


def design_filterbank(config: FrontendConfig | None = None) -> GaborFilterbank:
    config = config or FrontendConfig()
    edges = mel_breakpoints(config)
    centers = edges[1:-1]
    fwhm = edges[2:] - edges[:-2]
    sigmas = config.sample_rate * np.sqrt(2 * np.log(2)) / (np.pi * fwhm)

    half = (config.gabor_size - 1) // 2
    t = np.arange(-half, half + 1, dtype=np.float64)
    carrier = np.exp(2j * np.pi * np.outer(centers, t) / config.sample_rate)
    env = np.exp(-(t[None, :] ** 2) / (2 * sigmas[:, None] ** 2)) / (
        np.sqrt(2 * np.pi) * sigmas[:, None]
    )
    kernels = carrier * env

    half_p = (config.pool_size - 1) // 2
    tp = np.arange(-half_p, half_p + 1, dtype=np.float64)
    pool_kernel = np.exp(-(tp**2) / (2 * config.pool_sigma**2))
    pool_kernel /= pool_kernel.sum()

    for arr in (centers, sigmas, kernels, pool_kernel):
        arr.setflags(write=False)
    return GaborFilterbank(config, centers, sigmas, kernels, pool_kernel)


def _check_length(n_samples: int, fb: GaborFilterbank):
    if n_samples < fb.kernels.shape[1]:
        raise ClipTooShort(
            f"clip has {n_samples} samples, the filterbank needs at least {fb.kernels.shape[1]}"
        )


def decompose(samples, fb: GaborFilterbank) -> np.ndarray:
    """Squared modulus of each filter's response, ``(N, n_samples)``.

    ``out[i, t] = |sum_tau x[t + tau] k_i[tau]|**2`` with zeros outside the
    clip. Works on a leading batch axis too: ``(B, n)`` -> ``(B, N, n)``.
    """
    x = np.asarray(samples, dtype=np.float64)
    _check_length(x.shape[-1], fb)
    n = x.shape[-1]
    size = fb.kernels.shape[1]
    half = (size - 1) // 2
    nfft = sfft.next_fast_len(n + size - 1)
    # correlation with k == convolution with the reversed kernel
    spec = sfft.fft(x, nfft, axis=-1)[..., None, :] * fb.kernel_spectra(nfft)
    y = sfft.ifft(spec, axis=-1)[..., half : half + n]
    return y.real**2 + y.imag**2


def decompose_direct(samples, fb: GaborFilterbank) -> np.ndarray:
    """O(n*L) reference for :func:`decompose` (single clip only)."""
    x = np.asarray(samples, dtype=np.float64)
    _check_length(x.shape[-1], fb)
    n = x.shape[0]
    half = (fb.kernels.shape[1] - 1) // 2
    padded = np.concatenate([np.zeros(half), x, np.zeros(half)])
    out = np.empty((fb.n_filters, n))
    for i in range(fb.n_filters):
        k = fb.kernels[i]
        acc = np.zeros(n, dtype=np.complex128)
        for j, tau in enumerate(range(-half, half + 1)):
            acc += k[j] * padded[half + tau : half + tau + n]
        out[i] = acc.real**2 + acc.imag**2
    return out


def pool(detection, config: FrontendConfig, pool_kernel=None) -> np.ndarray:
    """Gaussian low-pass + decimation: ``(..., N, n)`` detections -> ``(..., T, N)`` energies.

    Frame ``k`` is the kernel-weighted sum centred on sample ``k * hop``.
    """
    det = np.asarray(detection, dtype=np.float64)
    if pool_kernel is None:
        half_p = (config.pool_size - 1) // 2
        tp = np.arange(-half_p, half_p + 1, dtype=np.float64)
        pool_kernel = np.exp(-(tp**2) / (2 * config.pool_sigma**2))
        pool_kernel /= pool_kernel.sum()
    n = det.shape[-1]
    size = pool_kernel.shape[0]
    half = (size - 1) // 2
    n_frames = config.n_frames(n)
    padded = np.zeros(det.shape[:-1] + (n_frames * config.hop + size,))
    padded[..., half : half + n] = det
    windows = np.lib.stride_tricks.sliding_window_view(padded, size, axis=-1)[
        ..., : n_frames * config.hop : config.hop, :
    ]
    energy = windows @ pool_kernel  # (..., N, T)
    return np.swapaxes(energy, -1, -2)


def energy_map(samples, fb: GaborFilterbank) -> np.ndarray:
    """Waveform(s) -> energy map ``(T, N)`` or ``(B, T, N)``."""
    return pool(decompose(samples, fb), fb.config, fb.pool_kernel)
