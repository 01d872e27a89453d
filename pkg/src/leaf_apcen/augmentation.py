"""Complex-acoustic-condition perturbations and balanced corpus assembly.

Three perturbations are provided: babble noise (three summed speech
sources), background music, both mixed at a random SNR, and segment-wise
random loudness changes held inside a dBFS window. Every random choice
comes from a named sub-stream of one integer seed (see :mod:`.seeding`).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ClipTooShort, ConfigInvalid, PoolTooSmall, SilentClip
from .seeding import rng_for
from .signal_io import (
    SAMPLE_RATE,
    AudioClip,
    ManifestRow,
    read_manifest,
    read_wav,
    resolve,
    synth_clip,
    write_manifest,
    write_wav,
)

log = logging.getLogger(__name__)

CONDITIONS = ("clean", "babble", "music", "loudness")
BABBLE_RMS = 0.1


@dataclass(frozen=True)
class AugmentSpec:
    kind: str = "clean"
    snr_range_db: tuple = (0.0, 15.0)
    n_babble_sources: int = 3
    gain_range_db: tuple = (-8.0, 8.0)
    segment_ms: float = 250.0
    spl_bounds_dbfs: tuple = (-40.0, -15.0)
    crossfade_ms: float = 5.0
    max_redraws: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.kind not in CONDITIONS:
            raise ConfigInvalid(f"unknown condition {self.kind!r}; expected one of {CONDITIONS}")
        lo, hi = self.snr_range_db
        if lo > hi:
            raise ConfigInvalid("snr range is empty")
        if self.gain_range_db[0] > self.gain_range_db[1]:
            raise ConfigInvalid("gain range is empty")
        if self.segment_ms <= 0 or self.crossfade_ms < 0:
            raise ConfigInvalid("segment_ms must be > 0 and crossfade_ms >= 0")
        if not self.spl_bounds_dbfs[0] < self.spl_bounds_dbfs[1]:
            raise ConfigInvalid("SPL lower bound must be below the upper bound")
        if self.n_babble_sources < 1:
            raise ConfigInvalid("n_babble_sources must be >= 1")


def _samples(clip) -> np.ndarray:
    return clip.samples if isinstance(clip, AudioClip) else np.asarray(clip, dtype=np.float64)


def mean_square(x) -> float:
    x = _samples(x)
    return float(np.mean(x * x)) if x.size else 0.0


def measure_rms_dbfs(clip) -> float:
    """``20*log10(RMS)`` over the whole clip."""
    ms = mean_square(clip)
    if ms == 0.0:
        raise SilentClip("cannot measure the level of an empty or all-zero clip")
    return 10.0 * np.log10(ms)


def fit_length(x, n: int, rng: np.random.Generator) -> np.ndarray:
    """Crop (random offset) or loop ``x`` to exactly ``n`` samples."""
    x = _samples(x)
    if x.size == 0:
        raise SilentClip("cannot fit an empty clip")
    if x.size >= n:
        offset = int(rng.integers(0, x.size - n + 1))
        return x[offset : offset + n].copy()
    offset = int(rng.integers(0, x.size))
    reps = -(-(n + offset) // x.size)
    return np.tile(x, reps)[offset : offset + n]


# -- SNR mixing ----------------------------------------------------------------


@dataclass
class Mixture:
    clip: AudioClip
    clean: np.ndarray  # scaled clean component inside the mix
    noise: np.ndarray  # scaled noise component inside the mix
    noise_gain: float
    peak_factor: float = 1.0  # applied to both components when the sum exceeded full scale

    @property
    def snr_db(self) -> float:
        return 10.0 * np.log10(mean_square(self.clean) / mean_square(self.noise))


def mix_at_snr(clean, noise, snr_db: float, seed=0) -> Mixture:
    """Add ``noise`` scaled so that the clean-to-noise power ratio equals ``snr_db``.

    Powers are full-clip mean squares. The noise is cropped or looped from a
    seeded random offset to the clean length.
    """
    c = _samples(clean)
    p_clean = mean_square(c)
    if p_clean == 0.0:
        raise SilentClip("clean clip is silent")
    if mean_square(noise) == 0.0:
        raise SilentClip("noise clip is silent")
    rng = seed if isinstance(seed, np.random.Generator) else rng_for(seed, "mix", "offset")
    n = fit_length(noise, c.size, rng)
    p_noise = mean_square(n)
    if p_noise == 0.0:
        raise SilentClip("the selected noise excerpt is silent")
    gain = float(np.sqrt(p_clean / (p_noise * 10.0 ** (snr_db / 10.0))))
    c_part = c.copy()
    n_part = gain * n
    mixed = c_part + n_part
    peak = float(np.max(np.abs(mixed))) if mixed.size else 0.0
    factor = 1.0
    if peak > 1.0:
        factor = 1.0 / peak
        c_part *= factor
        n_part *= factor
        mixed = np.clip(c_part + n_part, -1.0, 1.0)  # guards the last ulp only
    return Mixture(AudioClip(mixed, SAMPLE_RATE), c_part, n_part, gain, factor)


# -- noise sources -------------------------------------------------------------


@dataclass
class NoisePool:
    speech: list = field(default_factory=list)  # AudioClips
    music: list = field(default_factory=list)
    names: dict = field(default_factory=dict)

    def __post_init__(self):
        for tag in ("speech", "music"):
            for k, clip in enumerate(getattr(self, tag)):
                if clip.sample_rate != SAMPLE_RATE:
                    raise ConfigInvalid(f"{tag} source {k} is not 16 kHz")
                if len(clip) < SAMPLE_RATE:
                    raise ClipTooShort(f"{tag} source {k} is shorter than 1 s")

    @classmethod
    def from_dir(cls, root) -> "NoisePool":
        """Load ``root/speech/*.wav`` and ``root/music/*.wav`` (sorted by name)."""
        root = Path(root)
        pools, names = {}, {}
        for tag in ("speech", "music"):
            files = sorted((root / tag).glob("*.wav")) if (root / tag).is_dir() else []
            pools[tag] = [read_wav(f) for f in files]
            names[tag] = [f.name for f in files]
        if not pools["speech"] and not pools["music"]:
            raise PoolTooSmall(f"{root}: no WAV files under speech/ or music/")
        return cls(pools["speech"], pools["music"], names)

    @classmethod
    def synthetic(cls, n_speech=6, n_music=4, duration=3.0, seed=0) -> "NoisePool":
        """Stand-in pool: AM noise as speech, decaying harmonic complexes as music."""
        rng = rng_for(seed, "pool")
        speech = [
            synth_clip("am_noise", am_rate=float(rng.uniform(3.0, 6.0)), amplitude=0.5,
                       duration=duration, seed=int(rng.integers(2**31)))
            for _ in range(n_speech)
        ]  # fmt: skip
        music = [
            synth_clip("tone_complex", frequency=float(rng.uniform(110.0, 880.0)), amplitude=0.5,
                       duration=duration, seed=int(rng.integers(2**31)))
            for _ in range(n_music)
        ]  # fmt: skip
        return cls(speech, music)

    def save(self, root):
        root = Path(root)
        for tag in ("speech", "music"):
            (root / tag).mkdir(parents=True, exist_ok=True)
            for k, clip in enumerate(getattr(self, tag)):
                write_wav(clip, root / tag / f"{tag}_{k:03d}.wav")


def make_babble(pool: NoisePool, duration: float, seed=0, n_sources=3) -> AudioClip:
    """Sum ``n_sources`` distinct speech sources (random offsets), normalized to RMS 0.1."""
    if len(pool.speech) < n_sources:
        raise PoolTooSmall(f"babble needs {n_sources} speech sources, pool has {len(pool.speech)}")
    rng = seed if isinstance(seed, np.random.Generator) else rng_for(seed, "babble")
    n = int(round(duration * SAMPLE_RATE))
    picks = rng.choice(len(pool.speech), size=n_sources, replace=False)
    total = np.zeros(n)
    for k in picks:
        total += fit_length(pool.speech[int(k)], n, rng)
    ms = mean_square(total)
    if ms == 0.0:
        raise SilentClip("babble excerpt is silent")
    return AudioClip(total * (BABBLE_RMS / np.sqrt(ms)), SAMPLE_RATE)


# -- loudness modulation -------------------------------------------------------


def segment_bounds(n_samples: int, segment_len: int) -> list:
    return [(s, min(s + segment_len, n_samples)) for s in range(0, n_samples, segment_len)]


def segment_levels_dbfs(clip, segment_ms=250.0, sample_rate=SAMPLE_RATE) -> np.ndarray:
    """dBFS of each consecutive segment; ``-inf`` for silent segments."""
    x = _samples(clip)
    seg = int(round(segment_ms * sample_rate / 1000.0))
    out = []
    for s, e in segment_bounds(x.size, seg):
        ms = float(np.mean(x[s:e] ** 2))
        out.append(10.0 * np.log10(ms) if ms > 0 else -np.inf)
    return np.array(out)


def _root(a, b, c):
    """Largest non-negative g with a*g^2 + b*g + c = 0 (a > 0, b >= 0); 0 if c >= 0."""
    if c >= 0:
        return 0.0
    return (-b + np.sqrt(b * b - 4 * a * c)) / (2 * a)


def _feasible_gain(x, ramp_w, g_prev, p_lo, p_hi):
    """Amplitude-gain interval keeping the segment's mean square in ``[p_lo, p_hi]``
    and its peak at or below full scale, given the incoming crossfade."""
    r = ramp_w.size
    xr, xc = x[:r], x[r:]
    n = x.size
    x2r = xr * xr
    a = (np.sum(x2r * ramp_w**2) + np.sum(xc * xc)) / n
    b = 2 * g_prev * np.sum(x2r * ramp_w * (1 - ramp_w)) / n
    c = g_prev**2 * np.sum(x2r * (1 - ramp_w) ** 2) / n
    lo = _root(a, b, c - p_lo)
    hi = _root(a, b, c - p_hi)
    # peak: ((1-w) g_prev + w g) |x| <= 1 on the ramp, g |x| <= 1 after it
    caps = []
    if xc.size and np.max(np.abs(xc)) > 0:
        caps.append(1.0 / np.max(np.abs(xc)))
    ar = np.abs(xr)
    mask = ar > 0
    if np.any(mask):
        caps.append(np.min((1.0 / ar[mask] - (1 - ramp_w[mask]) * g_prev) / ramp_w[mask]))
    if caps:
        hi = min(hi, max(min(caps), 0.0))
    return lo, hi


@dataclass
class LoudnessResult:
    clip: AudioClip
    gains_db: np.ndarray  # per segment; 0 for silent segments
    clamped: np.ndarray  # per segment: True if the redraw budget ran out


def loudness_modulate(clip, spec: AugmentSpec | None = None, seed=None) -> LoudnessResult:
    """Random per-segment gains held inside the dBFS window, joined by linear ramps.

    Each segment after the first starts with a ``crossfade_ms`` linear ramp
    from the previous gain. A gain is drawn uniformly in dB; draws that
    would move the segment outside the window (or push a sample past full
    scale) are redrawn up to ``max_redraws`` times, after which the last
    draw is clamped to the nearest admissible gain. Silent segments keep 0 dB.
    """
    spec = spec or AugmentSpec(kind="loudness")
    x = _samples(clip)
    sr = clip.sample_rate if isinstance(clip, AudioClip) else SAMPLE_RATE
    seg = int(round(spec.segment_ms * sr / 1000.0))
    if x.size < seg:
        raise ClipTooShort(f"clip of {x.size} samples is shorter than one {seg}-sample segment")
    if mean_square(x) == 0.0:
        raise SilentClip("cannot loudness-modulate a silent clip")
    rng = seed if isinstance(seed, np.random.Generator) else rng_for(
        spec.seed if seed is None else seed, "loudness"
    )
    ramp_len = int(round(spec.crossfade_ms * sr / 1000.0))
    # targets pulled in slightly so clamped segments stay inside after rounding
    p_lo = 10.0 ** (spec.spl_bounds_dbfs[0] / 10.0) * (1 + 1e-9)
    p_hi = 10.0 ** (spec.spl_bounds_dbfs[1] / 10.0) * (1 - 1e-9)
    g_lo_db, g_hi_db = spec.gain_range_db

    bounds = segment_bounds(x.size, seg)
    gains = np.ones(len(bounds))
    clamped = np.zeros(len(bounds), dtype=bool)
    env = np.empty(x.size)
    g_prev = 1.0
    for k, (s, e) in enumerate(bounds):
        xs = x[s:e]
        r = min(ramp_len, e - s) if k > 0 else 0
        w = (np.arange(r) + 1.0) / (r + 1.0)
        if np.all(xs == 0):
            g = g_prev  # nothing to scale; hold the gain so no ramp is needed
            gains[k] = 1.0
        else:
            lo, hi = _feasible_gain(xs, w, g_prev, p_lo, p_hi)
            for _ in range(1 + spec.max_redraws):
                g = 10.0 ** (rng.uniform(g_lo_db, g_hi_db) / 20.0)
                if lo <= g <= hi:
                    break
            else:
                g = min(max(g, lo), hi) if lo <= hi else hi
                clamped[k] = True
            gains[k] = g
        env[s : s + r] = (1 - w) * g_prev + w * g
        env[s + r : e] = g
        g_prev = g
    y = x * env
    n_over = int(np.count_nonzero(np.abs(y) > 1.0))
    if n_over:
        log.warning("loudness modulation clipped %d samples", n_over)
        y = np.clip(y, -1.0, 1.0)
    return LoudnessResult(AudioClip(y, sr), 20.0 * np.log10(gains), clamped)


# -- corpus assembly -----------------------------------------------------------


def augment_clip(clip: AudioClip, spec: AugmentSpec, pool: NoisePool | None, seed, index=0) -> tuple:
    """Apply one condition. Returns ``(AudioClip, info dict)``.

    The random stream depends only on ``(seed, index, condition)``.
    """
    rng = rng_for(seed, "augment", index, spec.kind)
    if spec.kind == "clean":
        return AudioClip(clip.samples.copy(), clip.sample_rate), {}
    if spec.kind == "loudness":
        res = loudness_modulate(clip, spec, rng)
        return res.clip, {"gains_db": res.gains_db}
    if pool is None:
        raise PoolTooSmall(f"condition {spec.kind!r} needs a noise pool")
    snr = float(rng.uniform(*spec.snr_range_db))
    if spec.kind == "babble":
        noise = make_babble(pool, clip.duration, rng, spec.n_babble_sources)
    else:
        if not pool.music:
            raise PoolTooSmall("music condition needs at least one music source")
        noise = pool.music[int(rng.integers(len(pool.music)))]
    mix = mix_at_snr(clip, noise, snr, rng)
    return mix.clip, {"snr_db": snr, "peak_factor": mix.peak_factor}


def assign_conditions(rows, seed, splits=("train", "val", "test")) -> list:
    """Balanced condition per row (``None`` for rows outside ``splits``).

    Within each class, rows are visited split by split (in ``splits`` order)
    in a seeded random order and the four conditions are dealt cyclically,
    so per-class counts differ by at most one, overall and within each split.
    """
    out = [None] * len(rows)
    labels = sorted({r.label for r in rows})
    for label in labels:
        counter = 0
        for split in splits:
            idx = [i for i, r in enumerate(rows) if r.label == label and r.split == split]
            order = rng_for(seed, "assign", label, split).permutation(len(idx))
            for j in order:
                out[idx[j]] = CONDITIONS[counter % len(CONDITIONS)]
                counter += 1
    return out


def build_corpus(manifest, pool: NoisePool, out_dir, seed=0, *, spec: AugmentSpec | None = None,
                 splits=("train", "val", "test")) -> list:
    """Write the perturbed corpus and ``out_dir/manifest.csv``; returns the new rows."""
    if isinstance(manifest, (str, Path)):
        base = Path(manifest)
        rows = read_manifest(base)
    else:
        base = Path(".") / "manifest.csv"
        rows = list(manifest)
    out_dir = Path(out_dir)
    spec = spec or AugmentSpec()
    conditions = assign_conditions(rows, seed, splits)
    new_rows = []
    for i, (row, cond) in enumerate(zip(rows, conditions)):
        clip = read_wav(resolve(base, row.path))
        if cond is None:
            cond = "clean"
        out, _ = augment_clip(clip, replace(spec, kind=cond), pool, seed, i)
        rel = Path(row.split) / f"{i:05d}_{cond}.wav"
        (out_dir / rel.parent).mkdir(parents=True, exist_ok=True)
        write_wav(out, out_dir / rel)
        new_rows.append(ManifestRow(rel.as_posix(), row.label, row.split, cond))
    write_manifest(new_rows, out_dir / "manifest.csv")
    return new_rows
