"""Waveform and feature-file I/O, manifests and synthetic test signals."""

from __future__ import annotations

import csv
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import (
    AliasRisk,
    BadMagic,
    ConfigInvalid,
    CorruptHeader,
    DimensionOverflow,
    UnsupportedFormat,
)

log = logging.getLogger(__name__)

SAMPLE_RATE = 16000
PCM16_SCALE = 32768.0

FEATURE_MAGIC = b"APCN"
FEATURE_VERSION = 1
# magic, version, n_channels, n_frames, sample_rate, hop, kind, reserved
FEATURE_HEADER = struct.Struct("<4sHHIIIII")
KIND_ENERGY = 0
KIND_FEATURE = 1

SPLITS = ("train", "val", "test")


@dataclass
class AudioClip:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise UnsupportedFormat(f"expected mono samples, got shape {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("audio samples must be finite")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


def read_wav(path) -> AudioClip:
    """Read a 16 kHz mono PCM16 or float32 WAV file.

    PCM16 samples are divided by 32768 so that -32768 maps to exactly -1.0.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(12)
    if len(head) < 12 or head[:4] != b"RIFF" or head[8:12] != b"WAVE":
        raise CorruptHeader(f"{path}: not a RIFF/WAVE file")
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        msg = str(exc)
        if "format" in msg.lower():
            raise UnsupportedFormat(f"{path}: {msg}") from exc
        raise CorruptHeader(f"{path}: {msg}") from exc
    if data.ndim != 1:
        raise UnsupportedFormat(f"{path}: channels {data.shape[1]} (mono required)")
    if rate != SAMPLE_RATE:
        raise UnsupportedFormat(f"{path}: sample_rate {rate} (16000 required)")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / PCM16_SCALE
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise UnsupportedFormat(f"{path}: sample format {data.dtype} (int16 or float32 required)")
    return AudioClip(samples, rate)


def to_pcm16(samples: np.ndarray) -> tuple[np.ndarray, int]:
    """Quantize to int16, returning the codes and the number of clipped samples."""
    samples = np.asarray(samples, dtype=np.float64)
    n_clipped = int(np.count_nonzero(np.abs(samples) > 1.0))
    codes = np.round(np.clip(samples, -1.0, 1.0) * PCM16_SCALE)
    return np.clip(codes, -32768, 32767).astype(np.int16), n_clipped


def write_wav(clip: AudioClip, path) -> int:
    """Write ``clip`` as PCM16 mono. Returns how many samples had to be clipped."""
    codes, n_clipped = to_pcm16(clip.samples)
    if n_clipped:
        log.warning("%s: clipped %d samples to full scale", path, n_clipped)
    wavfile.write(Path(path), clip.sample_rate, codes)
    return n_clipped


# -- feature files -----------------------------------------------------------


@dataclass
class FeatureFile:
    values: np.ndarray  # (n_frames, n_channels) float32
    sample_rate: int = SAMPLE_RATE
    hop: int = 160
    kind: int = KIND_FEATURE

    @property
    def frame_rate(self) -> float:
        return self.sample_rate / self.hop


def save_features(values, path, *, sample_rate=SAMPLE_RATE, hop=160, kind=KIND_FEATURE):
    """Write a frames x channels map in the APCN binary layout (float32, frame-major)."""
    values = np.ascontiguousarray(values, dtype="<f4")
    if values.ndim != 2:
        raise ValueError(f"feature map must be 2-D (frames, channels), got {values.shape}")
    n_frames, n_channels = values.shape
    if n_channels > 0xFFFF or n_frames > 0xFFFFFFFF:
        raise DimensionOverflow(f"map of {n_frames} x {n_channels} does not fit the header")
    header = FEATURE_HEADER.pack(
        FEATURE_MAGIC, FEATURE_VERSION, n_channels, n_frames, sample_rate, hop, kind, 0
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(values.tobytes(order="C"))


def load_features(path) -> FeatureFile:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < FEATURE_HEADER.size:
        raise CorruptHeader(f"{path}: truncated header")
    magic, version, n_channels, n_frames, rate, hop, kind, _ = FEATURE_HEADER.unpack_from(raw)
    if magic != FEATURE_MAGIC:
        raise BadMagic(f"{path}: magic {magic!r}, expected {FEATURE_MAGIC!r}")
    if version != FEATURE_VERSION:
        raise UnsupportedFormat(f"{path}: feature file version {version}")
    payload = raw[FEATURE_HEADER.size:]
    if len(payload) != 4 * n_channels * n_frames:
        raise CorruptHeader(
            f"{path}: payload has {len(payload)} bytes, header implies {4 * n_channels * n_frames}"
        )
    values = np.frombuffer(payload, dtype="<f4").reshape(n_frames, n_channels).copy()
    return FeatureFile(values, rate, hop, kind)


def save_features_csv(values, path):
    """One frame per line, channels in order, 9 significant digits, no header."""
    np.savetxt(path, np.atleast_2d(np.asarray(values)), fmt="%.9g", delimiter=",")


# -- manifests ---------------------------------------------------------------


@dataclass
class ManifestRow:
    path: str
    label: int
    split: str
    condition: str | None = None


def read_manifest(path, *, check_files=True) -> list[ManifestRow]:
    """Load a ``path,label,split[,condition]`` CSV; relative paths resolve against its folder."""
    path = Path(path)
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            split = rec["split"].strip()
            if split not in SPLITS:
                raise ConfigInvalid(f"{path}: unknown split {split!r}")
            rows.append(
                ManifestRow(
                    rec["path"].strip(),
                    int(rec["label"]),
                    split,
                    (rec.get("condition") or None),
                )
            )
    labels = sorted({r.label for r in rows})
    if labels and labels != list(range(len(labels))):
        raise ConfigInvalid(f"{path}: class ids must be contiguous from 0, got {labels}")
    if check_files:
        for r in rows:
            if not resolve(path, r.path).is_file():
                raise FileNotFoundError(f"{path}: missing audio file {r.path}")
    return rows


def resolve(manifest_path, entry) -> Path:
    entry = Path(entry)
    return entry if entry.is_absolute() else Path(manifest_path).parent / entry


def write_manifest(rows, path):
    with_condition = any(r.condition is not None for r in rows)
    fields = ["path", "label", "split"] + (["condition"] if with_condition else [])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for r in rows:
            rec = [r.path, r.label, r.split]
            if with_condition:
                rec.append(r.condition or "clean")
            writer.writerow(rec)


# -- synthetic signals -------------------------------------------------------

SYNTH_KINDS = ("sine", "am_tone", "tone_complex", "silence", "white_noise", "am_noise")


def synth_clip(
    kind: str,
    *,
    frequency: float = 1000.0,
    am_rate: float = 4.0,
    amplitude: float = 0.5,
    duration: float = 1.0,
    seed: int = 0,
    sample_rate: int = SAMPLE_RATE,
) -> AudioClip:
    """Deterministic test signals.

    ``amplitude`` is the peak amplitude for every kind. ``am_noise`` (noise
    under a slow random-phase envelope) serves as a speech-like stand-in and
    ``tone_complex`` (decaying harmonics) as a music-like one.
    """
    if kind not in SYNTH_KINDS:
        raise ConfigInvalid(f"unknown synth kind {kind!r}")
    if duration <= 0:
        raise ConfigInvalid("duration must be positive")
    nyquist = sample_rate / 2
    if kind in ("sine", "am_tone", "tone_complex") and not 0 < frequency < nyquist:
        raise AliasRisk(f"frequency {frequency} Hz is not below Nyquist ({nyquist} Hz)")
    if kind in ("am_tone", "am_noise") and not 0 < am_rate < nyquist:
        raise AliasRisk(f"AM rate {am_rate} Hz is not below Nyquist ({nyquist} Hz)")
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    rng = np.random.default_rng(seed)

    if kind == "silence":
        x = np.zeros(n)
    elif kind == "sine":
        x = np.sin(2 * np.pi * frequency * t)
    elif kind == "am_tone":
        env = 0.5 * (1.0 + np.sin(2 * np.pi * am_rate * t))
        x = env * np.sin(2 * np.pi * frequency * t)
    elif kind == "tone_complex":
        x = np.zeros(n)
        n_harm = max(1, min(6, int(nyquist // frequency)))
        for k in range(1, n_harm + 1):
            if k * frequency >= nyquist:
                break
            x += np.sin(2 * np.pi * k * frequency * t + rng.uniform(0, 2 * np.pi)) / k
    elif kind == "white_noise":
        x = rng.uniform(-1.0, 1.0, n)
    else:  # am_noise
        phase = rng.uniform(0, 2 * np.pi)
        env = np.clip(np.sin(2 * np.pi * am_rate * t + phase), 0.0, None) ** 2
        x = env * rng.uniform(-1.0, 1.0, n)

    peak = np.max(np.abs(x)) if n else 0.0
    if kind not in ("sine", "white_noise", "silence") and peak > 0:
        x = x / peak
    return AudioClip(amplitude * x, sample_rate)
