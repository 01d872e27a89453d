"""Desk-scale training and evaluation of the four front-end variants.

Pipeline: fixed Gabor/Gaussian front-end -> normalization variant -> toy
classifier on per-channel mean and standard deviation over frames.

Variants:
    fixed      PCEN frozen at its initial values
    pcen       PCEN with learnable s, alpha, delta, gamma
    simp_pcen  SimpPCEN with learnable per-channel exponents
    apcen      SimpPCEN with exponents predicted by the adaptive controller
"""

from __future__ import annotations

import csv
import logging
import struct
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import augmentation as aug
from . import controller as ctl
from . import normalization as nz
from .errors import ConfigInvalid, CorruptHeader, BadMagic, EmptyTestSet, MissingTape, UnsupportedFormat
from .frontend import FrontendConfig, design_filterbank, energy_map
from .seeding import rng_for
from .signal_io import SAMPLE_RATE, AudioClip, ManifestRow, read_manifest, read_wav, resolve, write_manifest, write_wav

log = logging.getLogger(__name__)

VARIANTS = ("fixed", "pcen", "simp_pcen", "apcen")
STD_FLOOR = 1e-12  # inside the square root of the frame variance


@dataclass
class TrainConfig:
    variant: str = "apcen"
    learning_rate: float = 1e-4
    weight_decay: float = 1e-4
    batch_size: int = 256
    epochs: int = 150
    clip_seconds: float = 1.0
    seed: int = 0
    hidden: int = ctl.HIDDEN
    mlp_hidden: int = ctl.MLP_HIDDEN
    backend_hidden: int = 64
    bptt_window: int = 0
    controller_axis: str = "channel"
    per_channel: bool = True
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigInvalid(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise ConfigInvalid("learning_rate must be > 0 and weight_decay >= 0")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigInvalid("batch_size and epochs must be >= 1")
        if self.clip_seconds <= 0:
            raise ConfigInvalid("clip_seconds must be > 0")

    @classmethod
    def desk(cls, **overrides) -> "TrainConfig":
        """Desk-scale defaults: batch 32, 30 epochs, larger learning rate."""
        base = dict(batch_size=32, epochs=30, learning_rate=3e-3)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def field_types(cls) -> dict:
        return {f.name: f.type for f in fields(cls)}


# -- toy back-end --------------------------------------------------------------


@dataclass
class ToyBackend:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    mu: np.ndarray  # frozen input standardization
    sd: np.ndarray

    @classmethod
    def init(cls, n_in, n_hidden, n_classes, rng) -> "ToyBackend":
        l1 = np.sqrt(6.0 / (n_in + n_hidden))
        l2 = np.sqrt(6.0 / (n_hidden + n_classes))
        return cls(
            rng.uniform(-l1, l1, (n_hidden, n_in)), np.zeros(n_hidden),
            rng.uniform(-l2, l2, (n_classes, n_hidden)), np.zeros(n_classes),
            np.zeros(n_in), np.ones(n_in),
        )  # fmt: skip

    @property
    def n_classes(self) -> int:
        return self.W2.shape[0]

    def params(self) -> dict:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}


def pooled_stats(X):
    """``(B, T, N)`` -> ``(B, 2N)``: per-channel mean then standard deviation over frames."""
    m = X.mean(axis=1)
    d = X - m[:, None]
    sd = np.sqrt(np.mean(d * d, axis=1) + STD_FLOOR)
    return np.concatenate([m, sd], axis=1), (d, sd)


def pooled_stats_backward(g, cache):
    d, sd = cache
    T = d.shape[1]
    N = sd.shape[1]
    g_m, g_sd = g[:, :N], g[:, N:]
    return g_m[:, None] / T + d * (g_sd / (T * sd))[:, None]


def log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=1, keepdims=True))


def cross_entropy(logits, labels) -> float:
    rows = np.arange(len(labels))
    d = logits - logits[rows, labels][:, None]
    d[rows, labels] = -np.inf
    # log1p keeps confident, correct rows accurate instead of cancelling to 0
    top = d.max(axis=1)
    sure = top <= 0
    per = np.where(sure, np.log1p(np.sum(np.exp(np.minimum(d, 0.0)), axis=1)), 0.0)
    per[~sure] = -log_softmax(logits[~sure])[np.arange(int((~sure).sum())), labels[~sure]]
    return float(np.mean(per))


def softmax_minus_onehot(logits, labels):
    rows = np.arange(len(labels))
    p = np.exp(log_softmax(logits))
    p[rows, labels] = 0.0
    p[rows, labels] = -p.sum(axis=1)
    return p


# -- model ---------------------------------------------------------------------


@dataclass
class Model:
    variant: str
    frontend: FrontendConfig
    backend: ToyBackend
    norm: object  # PcenParams | SimpPcenParams | ControllerWeights
    bptt_window: int = 0
    meta: dict = field(default_factory=dict)
    _fb: object = field(default=None, repr=False, compare=False)

    @property
    def filterbank(self):
        if self._fb is None:
            self._fb = design_filterbank(self.frontend)
        return self._fb

    def trainable(self) -> dict:
        """Arrays updated by the optimizer, by name (live references)."""
        out = {f"backend.{k}": v for k, v in self.backend.params().items()}
        if self.variant == "pcen":
            out.update({f"pcen.{k}": v for k, v in self.norm.arrays().items()})
        elif self.variant == "simp_pcen":
            out.update({f"simp.{k}": v for k, v in self.norm.arrays().items()})
        elif self.variant == "apcen":
            out.update({f"ctrl.{k}": v for k, v in self.norm.params.items()})
        return out

    def project(self):
        if self.variant in ("pcen", "simp_pcen"):
            self.norm.project()


def init_model(config: TrainConfig, n_classes: int, frontend: FrontendConfig | None = None) -> Model:
    frontend = frontend or FrontendConfig()
    N = frontend.n_filters
    backend = ToyBackend.init(2 * N, config.backend_hidden, n_classes, rng_for(config.seed, "init", "backend"))
    if config.variant in ("fixed", "pcen"):
        norm = nz.PcenParams.initial(N)
    elif config.variant == "simp_pcen":
        norm = nz.SimpPcenParams.initial(N)
    else:
        norm = ctl.init_weights(
            config.hidden, config.mlp_hidden, seed=int(rng_for(config.seed, "init", "controller").integers(2**63)),
            axis=config.controller_axis, per_channel=config.per_channel,
            n_channels=N if config.controller_axis == "time" else 0,
        )  # fmt: skip
    return Model(config.variant, frontend, backend, norm, config.bptt_window)


def normalize(model: Model, E, record=False):
    """Apply the model's normalization stage. Returns ``(X, cache or None)``."""
    if model.variant in ("fixed", "pcen"):
        return nz.pcen_forward(E, model.norm, return_cache=True) if record else (nz.pcen_forward(E, model.norm), None)
    if model.variant == "simp_pcen":
        if record:
            return nz.simp_pcen_forward(E, model.norm, return_cache=True)
        return nz.simp_pcen_forward(E, model.norm), None
    if record:
        X, _, tape = ctl.apcen_process(E, model.norm, record=True)
        return X, tape
    return ctl.apcen_process(E, model.norm)[0], None


def backend_forward(model: Model, X, record=False):
    b = model.backend
    f, s_cache = pooled_stats(X)
    z = (f - b.mu) / b.sd
    a = z @ b.W1.T + b.b1
    h = np.maximum(a, 0.0)
    logits = h @ b.W2.T + b.b2
    return logits, ((s_cache, z, a, h) if record else None)


@dataclass
class Tape:
    labels: np.ndarray
    logits: np.ndarray
    norm_cache: object
    backend_cache: tuple


def forward_loss(model: Model, E, labels, record=False):
    """Cross-entropy of a batch of energy maps ``(B, T, N)``.

    Returns ``(loss, logits)`` or ``(loss, logits, tape)`` when ``record``.
    """
    E = np.asarray(E, dtype=np.float64)
    if E.ndim == 2:
        E = E[None]
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    X, ncache = normalize(model, E, record)
    logits, bcache = backend_forward(model, X, record)
    loss = cross_entropy(logits, labels)
    if record:
        return loss, logits, Tape(labels, logits, ncache, bcache)
    return loss, logits


def backward(model: Model, tape: Tape | None) -> dict:
    """Gradients of the batch loss for every entry of ``model.trainable()``."""
    if not isinstance(tape, Tape):
        raise MissingTape("backward needs the tape from forward_loss(record=True)")
    b = model.backend
    B = tape.logits.shape[0]
    g_logits = softmax_minus_onehot(tape.logits, tape.labels) / B
    s_cache, z, a, h = tape.backend_cache
    grads = {
        "backend.W2": g_logits.T @ h,
        "backend.b2": g_logits.sum(0),
    }
    g_a = (g_logits @ b.W2) * (a > 0)
    grads["backend.W1"] = g_a.T @ z
    grads["backend.b1"] = g_a.sum(0)
    if model.variant == "fixed":
        return grads
    g_f = (g_a @ b.W1) / b.sd
    g_X = pooled_stats_backward(g_f, s_cache)
    if model.variant == "pcen":
        g = nz.pcen_backward(tape.norm_cache, g_X)
        grads.update({f"pcen.{k}": g[k] for k in ("s", "alpha", "delta", "gamma")})
    elif model.variant == "simp_pcen":
        g = nz.simp_pcen_backward(tape.norm_cache, g_X)
        grads.update({"simp.alpha": g["alpha"], "simp.gamma": g["gamma"]})
    else:
        g = ctl.apcen_backward(tape.norm_cache, g_X, window=model.bptt_window)
        grads.update({f"ctrl.{k}": v for k, v in g.items()})
    return grads


class Adam:
    """Adam with decoupled weight decay (``p -= lr * wd * p``), updating arrays in place."""

    def __init__(self, params: dict, lr, weight_decay=0.0, betas=(0.9, 0.999), eps=1e-8):
        self.params = params
        self.lr, self.wd, self.eps = lr, weight_decay, eps
        self.b1, self.b2 = betas
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict):
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for k, p in self.params.items():
            g = grads.get(k)
            if self.wd:
                p -= self.lr * self.wd * p
            if g is None:
                continue
            m, v = self.m[k], self.v[k]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def backward_and_step(model: Model, tape: Tape | None, opt: Adam) -> dict:
    grads = backward(model, tape)
    opt.step(grads)
    model.project()
    return grads


# -- data ----------------------------------------------------------------------


def crop_or_pad(x, n, rng=None):
    """Random ``n``-sample excerpt (zero-padded when ``x`` is shorter)."""
    if x.size <= n:
        out = np.zeros(n)
        out[: x.size] = x
        return out
    off = 0 if rng is None else int(rng.integers(0, x.size - n + 1))
    return x[off : off + n]


def windows(x, n):
    """Non-overlapping ``n``-sample windows; a lone short clip is zero-padded."""
    k = x.size // n
    if k == 0:
        return crop_or_pad(x, n)[None]
    return x[: k * n].reshape(k, n)


def energies(waves, model: Model, chunk=8) -> np.ndarray:
    """Energy maps for a stack of equal-length waveforms ``(B, n)`` -> ``(B, T, N)``."""
    waves = np.asarray(waves, dtype=np.float64)
    fb = model.filterbank
    return np.concatenate([energy_map(waves[i : i + chunk], fb) for i in range(0, len(waves), chunk)])


@dataclass
class Split:
    waves: list
    labels: np.ndarray

    def __len__(self):
        return len(self.waves)


def load_split(manifest_path, split) -> Split:
    rows = [r for r in read_manifest(manifest_path) if r.split == split]
    waves = [read_wav(resolve(manifest_path, r.path)).samples for r in rows]
    return Split(waves, np.array([r.label for r in rows], dtype=np.int64))


def n_classes_of(manifest_path) -> int:
    return len({r.label for r in read_manifest(manifest_path, check_files=False)})


def window_energies(model: Model, waves, clip_len, batch=32):
    """Energy maps of every clip's non-overlapping windows plus the owning clip index."""
    wins, owner = [], []
    for i, x in enumerate(waves):
        w = windows(np.asarray(x), clip_len)
        wins.append(w)
        owner += [i] * len(w)
    wins = np.concatenate(wins) if wins else np.zeros((0, clip_len))
    E = energies(wins, model) if len(wins) else np.zeros((0, 0, model.frontend.n_filters))
    return E, np.array(owner, dtype=np.int64)


def windowed_logits(model: Model, waves=None, clip_len=SAMPLE_RATE, batch=32, trajectories=None,
                    precomputed=None):
    """Average logits over each clip's non-overlapping windows."""
    E_all, owner = precomputed if precomputed is not None else window_energies(model, waves, clip_len)
    n_clips = int(owner.max()) + 1 if owner.size else 0
    out = np.zeros((n_clips, model.backend.n_classes))
    for s in range(0, len(E_all), batch):
        E = E_all[s : s + batch]
        if model.variant == "apcen":
            X, traj = ctl.apcen_process(E, model.norm)
            if trajectories is not None:
                trajectories.append(traj.in_box(model.norm.gamma_min, model.norm.gamma_range))
        else:
            X, _ = normalize(model, E)
        logits, _ = backend_forward(model, X)
        np.add.at(out, owner[s : s + batch], logits)
    counts = np.bincount(owner, minlength=n_clips)
    return out / np.maximum(counts, 1)[:, None]


def fit_standardization(model: Model, E):
    X, _ = normalize(model, E)
    f, _ = pooled_stats(X)
    model.backend.mu = f.mean(axis=0)
    sd = f.std(axis=0)
    model.backend.sd = np.where(sd > 1e-8 * max(float(np.max(sd)), 1e-300), sd, 1.0)


# -- training loop -------------------------------------------------------------


@dataclass
class TrainResult:
    history: list  # (epoch, train_loss, val_loss)
    best_epoch: int
    best_val_loss: float
    model: Model  # best checkpoint
    checkpoint: Path | None
    seconds: float


def train(config: TrainConfig, manifest_path, out_dir=None, *, frontend=None, progress=None) -> TrainResult:
    """Train one variant; keeps the checkpoint with the lowest validation loss."""
    t0 = time.perf_counter()
    manifest_path = Path(manifest_path)
    n_classes = n_classes_of(manifest_path)
    model = init_model(config, n_classes, frontend)
    tr = load_split(manifest_path, "train")
    va = load_split(manifest_path, "val")
    if len(tr) == 0:
        raise ConfigInvalid("manifest has no training clips")
    clip_len = int(round(config.clip_seconds * SAMPLE_RATE))

    # clips no longer than the crop length always yield the same excerpt
    cache = {}

    def batch_energy(idx, rng):
        out = []
        for i in idx:
            x = tr.waves[i]
            if x.size <= clip_len:
                if i not in cache:
                    cache[i] = energies(crop_or_pad(x, clip_len)[None], model)[0]
                out.append(cache[i])
            else:
                out.append(energies(crop_or_pad(x, clip_len, rng)[None], model)[0])
        return np.stack(out)

    init_rng = rng_for(config.seed, "standardize")
    fit_standardization(model, batch_energy(np.arange(len(tr)), init_rng))
    opt = Adam(model.trainable(), config.learning_rate, config.weight_decay,
               (config.beta1, config.beta2), config.adam_eps)  # fmt: skip

    val_windows = window_energies(model, va.waves, clip_len) if len(va) else None
    history = []
    best = (np.inf, 0, None)
    for epoch in range(1, config.epochs + 1):
        rng = rng_for(config.seed, "epoch", epoch)
        order = rng.permutation(len(tr))
        total, count = 0.0, 0
        for s in range(0, len(order), config.batch_size):
            idx = order[s : s + config.batch_size]
            E = batch_energy(idx, rng)
            loss, _, tape = forward_loss(model, E, tr.labels[idx], record=True)
            backward_and_step(model, tape, opt)
            total += loss * len(idx)
            count += len(idx)
        train_loss = total / count
        if len(va):
            val_loss = cross_entropy(windowed_logits(model, precomputed=val_windows), va.labels)
        else:
            val_loss = train_loss
        history.append((epoch, train_loss, val_loss))
        if progress:
            progress(epoch, train_loss, val_loss)
        if val_loss < best[0]:
            best = (val_loss, epoch, clone_model(model))
    best_model = best[2]
    best_model.meta.update(best_epoch=best[1], best_val_loss=best[0], seed=config.seed)
    ckpt = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_history(history, out_dir / "history.csv")
        ckpt = out_dir / "best.ckpt"
        save_model(best_model, ckpt)
    return TrainResult(history, best[1], best[0], best_model, ckpt, time.perf_counter() - t0)


def write_history(history, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss"])
        for epoch, tl, vl in history:
            w.writerow([epoch, repr(float(tl)), repr(float(vl))])


def read_history(path) -> list:
    with open(path, newline="") as fh:
        return [(int(r["epoch"]), float(r["train_loss"]), float(r["val_loss"])) for r in csv.DictReader(fh)]


@dataclass
class EvalResult:
    accuracy: float
    n_clips: int
    predictions: np.ndarray
    labels: np.ndarray
    trajectories_in_box: bool = True


def evaluate(model, manifest_path, split="test", clip_seconds=1.0) -> EvalResult:
    """Top-1 accuracy with non-overlapping windows and logit averaging."""
    if not isinstance(model, Model):
        model = load_model(model)
    data = load_split(Path(manifest_path), split)
    if len(data) == 0:
        raise EmptyTestSet(f"{manifest_path}: no clips in split {split!r}")
    flags = []
    logits = windowed_logits(model, data.waves, int(round(clip_seconds * SAMPLE_RATE)), trajectories=flags)
    pred = np.argmax(logits, axis=1)
    acc = float(np.mean(pred == data.labels))
    return EvalResult(acc, len(data), pred, data.labels, all(flags))


def clone_model(model: Model) -> Model:
    return load_model_bytes(model_to_bytes(model))


# -- model checkpoint ----------------------------------------------------------

MODEL_MAGIC = b"APCM"
MODEL_VERSION = 1
# magic, version, variant, n_classes, backend_hidden, n_filters, kernel_len, pool_len,
# hop, sample_rate, bptt_window, f_min, f_max, best_val_loss, best_epoch
MODEL_HEADER = struct.Struct("<4sHHIIIIIIII4d")


def _f8(*arrays) -> bytes:
    return b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays)


def model_to_bytes(model: Model) -> bytes:
    fe = model.frontend
    b = model.backend
    head = MODEL_HEADER.pack(
        MODEL_MAGIC, MODEL_VERSION, VARIANTS.index(model.variant), b.n_classes, b.W1.shape[0],
        fe.n_filters, fe.kernel_len, fe.pool_len or 0, fe.hop, fe.sample_rate, model.bptt_window,
        fe.f_min, fe.upper_freq, model.meta.get("best_val_loss", np.nan),
        float(model.meta.get("best_epoch", 0)),
    )  # fmt: skip
    body = _f8(b.mu, b.sd, b.W1, b.b1, b.W2, b.b2)
    if model.variant in ("fixed", "pcen"):
        p = model.norm
        body += _f8(p.s, p.alpha, p.delta, p.gamma, [p.eps])
    elif model.variant == "simp_pcen":
        p = model.norm
        body += _f8(p.alpha, p.gamma, [p.s, p.eps])
    else:
        body += ctl.weights_to_bytes(model.norm)
    return head + body


class _Reader:
    def __init__(self, buf, pos):
        self.buf, self.pos = buf, pos

    def take(self, *shape):
        n = int(np.prod(shape)) if shape else 1
        end = self.pos + 8 * n
        if end > len(self.buf):
            raise CorruptHeader("model checkpoint truncated")
        a = np.frombuffer(self.buf, dtype="<f8", count=n, offset=self.pos).astype(np.float64)
        self.pos = end
        return a.reshape(shape) if shape else float(a[0])


def load_model_bytes(buf: bytes) -> Model:
    if len(buf) < MODEL_HEADER.size:
        raise CorruptHeader("model checkpoint truncated")
    (magic, version, variant, C, Hb, N, L, Lp, hop, sr, window,
     f_min, f_max, best_val, best_epoch) = MODEL_HEADER.unpack_from(buf)  # fmt: skip
    if magic != MODEL_MAGIC:
        raise BadMagic(f"checkpoint magic {magic!r}, expected {MODEL_MAGIC!r}")
    if version != MODEL_VERSION:
        raise UnsupportedFormat(f"checkpoint version {version}")
    if variant >= len(VARIANTS):
        raise CorruptHeader(f"unknown variant code {variant}")
    fe = FrontendConfig(n_filters=N, kernel_len=L, pool_len=Lp or None, sample_rate=sr, hop=hop,
                        f_min=f_min, f_max=f_max)  # fmt: skip
    r = _Reader(buf, MODEL_HEADER.size)
    mu, sd = r.take(2 * N), r.take(2 * N)
    backend = ToyBackend(r.take(Hb, 2 * N), r.take(Hb), r.take(C, Hb), r.take(C), mu, sd)
    name = VARIANTS[variant]
    if name in ("fixed", "pcen"):
        norm = nz.PcenParams(r.take(N), r.take(N), r.take(N), r.take(N), r.take())
    elif name == "simp_pcen":
        a, g = r.take(N), r.take(N)
        norm = nz.SimpPcenParams(a, g, r.take(), r.take())
    else:
        norm, used = ctl.weights_from_bytes(buf, r.pos)
        r.pos += used
    if r.pos != len(buf):
        raise CorruptHeader(f"{len(buf) - r.pos} trailing bytes in model checkpoint")
    meta = {"best_val_loss": best_val, "best_epoch": int(best_epoch)}
    return Model(name, fe, backend, norm, window, meta)


def save_model(model: Model, path):
    with open(path, "wb") as fh:
        fh.write(model_to_bytes(model))


def load_model(path) -> Model:
    with open(path, "rb") as fh:
        return load_model_bytes(fh.read())


# -- synthetic task ------------------------------------------------------------

CARRIERS = (500.0, 1000.0, 2000.0, 4000.0)
AM_RATES = (4.0, 16.0)


@dataclass(frozen=True)
class SynthTask:
    train_per_class: int = 20
    val_per_class: int = 8
    test_per_class: int = 8
    train_seconds: float = 1.0
    val_seconds: float = 1.0
    test_seconds: float = 2.0
    profile: str = "clean"  # or "complex"

    def __post_init__(self):
        if self.profile not in ("clean", "complex"):
            raise ConfigInvalid(f"unknown profile {self.profile!r}")
        if min(self.train_per_class, self.val_per_class, self.test_per_class) < 0:
            raise ConfigInvalid("clip counts must be >= 0")

    @property
    def classes(self) -> list:
        return [(f, r) for f in CARRIERS for r in AM_RATES]


def task_clip(label: int, duration: float, rng: np.random.Generator) -> AudioClip:
    """One example of class ``label``: jittered AM tone over a faint noise floor."""
    f, r = SynthTask().classes[label]
    n = int(round(duration * SAMPLE_RATE))
    t = (np.arange(n) + rng.integers(0, SAMPLE_RATE)) / SAMPLE_RATE
    f = f * (1.0 + rng.uniform(-0.03, 0.03))
    r = r * (1.0 + rng.uniform(-0.1, 0.1))
    env = 0.5 * (1.0 + np.sin(2 * np.pi * r * t + rng.uniform(0, 2 * np.pi)))
    x = env * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    x /= max(np.max(np.abs(x)), 1e-12)
    amp = 10.0 ** rng.uniform(np.log10(0.05), np.log10(0.5))
    floor_db = rng.uniform(25.0, 40.0)
    noise = rng.uniform(-1.0, 1.0, n) * 10.0 ** (-floor_db / 20.0)
    return AudioClip(np.clip(amp * (x + noise), -1.0, 1.0), SAMPLE_RATE)


def generate_task(spec: SynthTask, out_dir, seed=0, pool: aug.NoisePool | None = None) -> Path:
    """Write the labeled corpus and return the path of its manifest.

    With the complex profile, the clean corpus is written to ``out_dir/clean``
    and passed through :func:`augmentation.build_corpus`; the returned
    manifest then lives in ``out_dir/complex``.
    """
    out_dir = Path(out_dir)
    clean_dir = out_dir / "clean" if spec.profile == "complex" else out_dir
    rows = []
    counts = {"train": spec.train_per_class, "val": spec.val_per_class, "test": spec.test_per_class}
    secs = {"train": spec.train_seconds, "val": spec.val_seconds, "test": spec.test_seconds}
    for split, k in counts.items():
        (clean_dir / split).mkdir(parents=True, exist_ok=True)
        for label in range(len(spec.classes)):
            for j in range(k):
                clip = task_clip(label, secs[split], rng_for(seed, "task", split, label, j))
                rel = f"{split}/c{label}_{j:04d}.wav"
                write_wav(clip, clean_dir / rel)
                rows.append(ManifestRow(rel, label, split))
    write_manifest(rows, clean_dir / "manifest.csv")
    if spec.profile == "clean":
        return clean_dir / "manifest.csv"
    pool = pool or aug.NoisePool.synthetic(seed=int(rng_for(seed, "pool").integers(2**31)))
    aug.build_corpus(clean_dir / "manifest.csv", pool, out_dir / "complex", seed=seed)
    return out_dir / "complex" / "manifest.csv"
