"""Neural adaptive controller and the APCEN processing loop.

At every frame the controller sees the current subband energies and the
previous output frame, and predicts the two SimpPCEN exponents::

    alpha_t = sigmoid(o_1)
    gamma_t = gamma_min + gamma_range * sigmoid(o_2)

Two controller layouts are available:

``axis="channel"`` (default)
    A bidirectional GRU runs across the channels of each frame on the
    per-channel pairs ``(E_t[i], X_{t-1}[i])``; its hidden state restarts
    from zero at every frame, so processing stays causal in time.
``axis="time"``
    A unidirectional GRU runs over frames on the ``2N`` vector
    ``[E_t; X_{t-1}]`` and carries its hidden state forward.

``per_channel`` selects one exponent pair per channel (default) or one pair
per frame shared by all channels.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import _kernels_py, kernels
from .errors import (
    BadMagic,
    ConfigInvalid,
    CorruptHeader,
    MissingTape,
    ShapeMismatch,
    UnsupportedFormat,
)
from .normalization import EPS, S0, TINY, _as_energy, _batched

GAMMA_MIN = 0.2
GAMMA_RANGE = 0.8
HIDDEN = 32
MLP_HIDDEN = 32

CHANNEL_NAMES = (
    "fwd.W_ih", "fwd.W_hh", "fwd.b_ih", "fwd.b_hh",
    "bwd.W_ih", "bwd.W_hh", "bwd.b_ih", "bwd.b_hh",
    "mlp.W1", "mlp.b1", "mlp.W2", "mlp.b2",
)  # fmt: skip
TIME_NAMES = ("gru.W_ih", "gru.W_hh", "gru.b_ih", "gru.b_hh", "mlp.W1", "mlp.b1", "mlp.W2", "mlp.b2")


def param_shapes(hidden, mlp_hidden, axis="channel", n_channels=0, per_channel=True) -> dict:
    H, mh = hidden, mlp_hidden
    if axis == "channel":
        gru = {"W_ih": (3 * H, 2), "W_hh": (3 * H, H), "b_ih": (3 * H,), "b_hh": (3 * H,)}
        shapes = {f"{d}.{k}": v for d in ("fwd", "bwd") for k, v in gru.items()}
        n_out, mlp_in = 2, 2 * H
    elif axis == "time":
        if n_channels < 1:
            raise ConfigInvalid("the time-axis controller needs n_channels >= 1")
        shapes = {
            "gru.W_ih": (3 * H, 2 * n_channels),
            "gru.W_hh": (3 * H, H),
            "gru.b_ih": (3 * H,),
            "gru.b_hh": (3 * H,),
        }
        n_out, mlp_in = (2 * n_channels if per_channel else 2), H
    else:
        raise ConfigInvalid(f"unknown controller axis {axis!r}")
    shapes.update(
        {"mlp.W1": (mh, mlp_in), "mlp.b1": (mh,), "mlp.W2": (n_out, mh), "mlp.b2": (n_out,)}
    )
    return shapes


@dataclass
class ControllerWeights:
    params: dict
    hidden: int = HIDDEN
    mlp_hidden: int = MLP_HIDDEN
    gamma_min: float = GAMMA_MIN
    gamma_range: float = GAMMA_RANGE
    axis: str = "channel"
    per_channel: bool = True
    n_channels: int = 0  # only used by the time-axis layout
    s0: float = S0
    eps: float = EPS

    def __post_init__(self):
        if self.hidden < 1 or self.mlp_hidden < 1:
            raise ConfigInvalid("hidden sizes must be >= 1")
        if not (self.gamma_min > 0 and self.gamma_range > 0 and self.gamma_min + self.gamma_range <= 1):
            raise ConfigInvalid("need gamma_min > 0, gamma_range > 0, gamma_min + gamma_range <= 1")
        expected = self.shapes()
        if list(self.params) != list(expected):
            self.params = {k: self.params[k] for k in expected if k in self.params}
        for name, shape in expected.items():
            if name not in self.params:
                raise ShapeMismatch(f"missing controller weight {name}")
            arr = np.asarray(self.params[name], dtype=np.float64)
            if arr.shape != shape:
                raise ShapeMismatch(f"{name}: shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ConfigInvalid(f"{name} contains non-finite values")
            self.params[name] = arr

    @property
    def input_dim(self) -> int:
        return 2 if self.axis == "channel" else 2 * self.n_channels

    @property
    def names(self):
        return CHANNEL_NAMES if self.axis == "channel" else TIME_NAMES

    def shapes(self) -> dict:
        return param_shapes(self.hidden, self.mlp_hidden, self.axis, self.n_channels, self.per_channel)

    def ordered(self) -> list:
        return [self.params[k] for k in self.names]

    def count(self) -> int:
        return int(sum(a.size for a in self.params.values()))

    def copy(self) -> "ControllerWeights":
        clone = {k: v.copy() for k, v in self.params.items()}
        return ControllerWeights(
            clone, self.hidden, self.mlp_hidden, self.gamma_min, self.gamma_range,
            self.axis, self.per_channel, self.n_channels, self.s0, self.eps,
        )  # fmt: skip


def init_weights(hidden=HIDDEN, mlp_hidden=MLP_HIDDEN, seed=0, **kw) -> ControllerWeights:
    """Xavier-uniform matrices (per gate block for the GRU), zero biases."""
    rng = np.random.default_rng(seed)
    shapes = param_shapes(
        hidden, mlp_hidden, kw.get("axis", "channel"), kw.get("n_channels", 0), kw.get("per_channel", True)
    )
    params = {}
    for name, shape in shapes.items():
        if len(shape) == 1:
            params[name] = np.zeros(shape)
            continue
        rows, fan_in = shape
        block = hidden if ".W_" in name and not name.startswith("mlp") else rows
        limit = np.sqrt(6.0 / (fan_in + block))
        params[name] = rng.uniform(-limit, limit, shape)
    return ControllerWeights(params, hidden, mlp_hidden, **kw)


def zero_weights(hidden=HIDDEN, mlp_hidden=MLP_HIDDEN, **kw) -> ControllerWeights:
    shapes = param_shapes(
        hidden, mlp_hidden, kw.get("axis", "channel"), kw.get("n_channels", 0), kw.get("per_channel", True)
    )
    return ControllerWeights({k: np.zeros(v) for k, v in shapes.items()}, hidden, mlp_hidden, **kw)


# -- state and trajectories ----------------------------------------------------


@dataclass
class ParamTrajectory:
    alpha: np.ndarray
    gamma: np.ndarray

    def in_box(self, gamma_min=GAMMA_MIN, gamma_range=GAMMA_RANGE) -> bool:
        a, g = self.alpha, self.gamma
        return bool(
            np.all(a > 0) and np.all(a < 1) and np.all(g >= gamma_min) and np.all(g <= gamma_min + gamma_range)
        )


@dataclass
class ControllerState:
    """Per-stream buffer for frame-by-frame processing."""

    prev_output: np.ndarray
    prev_smoothed: np.ndarray | None = None  # None until the first frame arrives
    hidden: np.ndarray | None = None  # time-axis layout only

    @classmethod
    def initial(cls, n_channels: int) -> "ControllerState":
        return cls(np.zeros(n_channels))


def _time_frame(u, h, w: ControllerWeights):
    p = w.params
    H = w.hidden
    gi = u @ p["gru.W_ih"].T + p["gru.b_ih"]
    h, r, z, n = _kernels_py._gru_step(gi, h, p["gru.W_hh"], p["gru.b_hh"], H)
    a1 = h @ p["mlp.W1"].T + p["mlp.b1"]
    h1 = np.maximum(a1, 0.0)
    o = np.clip(h1 @ p["mlp.W2"].T + p["mlp.b2"], -_kernels_py.LOGIT_CLAMP, _kernels_py.LOGIT_CLAMP)
    sig = _kernels_py._sigmoid(o)
    return sig, h, (r, z, n, a1, h1)


def _split_sig(sig, n, per_channel):
    if per_channel:
        return sig[..., :n], sig[..., n:]
    b = sig.shape[0]
    return np.broadcast_to(sig[:, :1], (b, n)), np.broadcast_to(sig[:, 1:], (b, n))


def controller_frame(E_t, state: ControllerState, w: ControllerWeights):
    """Predict ``(alpha_t, gamma_t)`` for one frame without advancing ``state``."""
    e = np.asarray(E_t, dtype=np.float64)
    if e.ndim != 1 or state.prev_output.shape != e.shape:
        raise ShapeMismatch(
            f"frame of shape {e.shape} does not match state of shape {state.prev_output.shape}"
        )
    n = e.shape[0]
    if w.axis == "channel":
        u = np.stack([e, state.prev_output], axis=-1)[None]
        sig, _ = _kernels_py._frame_forward(u, w.ordered(), w.hidden, w.per_channel, False)
        a, s2 = sig[0, :, 0], sig[0, :, 1]
    else:
        if n != w.n_channels:
            raise ShapeMismatch(f"controller expects {w.n_channels} channels, got {n}")
        h = np.zeros((1, w.hidden)) if state.hidden is None else state.hidden[None]
        sig, _, _ = _time_frame(np.concatenate([e, state.prev_output])[None], h, w)
        a, s2 = (x[0] for x in _split_sig(sig, n, w.per_channel))
    return np.array(a), w.gamma_min + w.gamma_range * np.array(s2)


def apcen_step(E_t, state: ControllerState, w: ControllerWeights) -> np.ndarray:
    """Process one frame in streaming fashion and advance ``state``."""
    e = np.asarray(E_t, dtype=np.float64)
    a, g = controller_frame(e, state, w)
    prev_m = e if state.prev_smoothed is None else state.prev_smoothed
    m = w.s0 * e + (1.0 - w.s0) * prev_m
    log_m = np.log(m + w.eps) if w.eps > 0 else np.log(np.maximum(m, TINY))
    x = np.where(e > 0, np.exp(g * np.log(np.maximum(e, TINY)) - a * log_m), 0.0)
    if w.axis == "time":
        h = np.zeros((1, w.hidden)) if state.hidden is None else state.hidden[None]
        _, h, _ = _time_frame(np.concatenate([e, state.prev_output])[None], h, w)
        state.hidden = h[0]
    state.prev_output = x
    state.prev_smoothed = m
    return x


# -- batched processing --------------------------------------------------------


@dataclass
class ApcenTape:
    """What the backward pass needs; internals are recomputed from it."""

    E: np.ndarray  # batched (B, T, N)
    weights: ControllerWeights
    squeeze: bool


def _time_forward(E, w: ControllerWeights, record=False):
    B, T, N = E.shape
    if N != w.n_channels:
        raise ShapeMismatch(f"controller expects {w.n_channels} channels, got {N}")
    X = np.zeros((B, T, N))
    alpha = np.empty((B, T, N))
    gamma = np.empty((B, T, N))
    steps = []
    h = np.zeros((B, w.hidden))
    x_prev = np.zeros((B, N))
    m_prev = E[:, 0].copy() if T else np.zeros((B, N))
    for t in range(T):
        e = E[:, t]
        u = np.concatenate([e, x_prev], axis=-1)
        h_prev = h
        sig, h, inner = _time_frame(u, h, w)
        a, s2 = _split_sig(sig, N, w.per_channel)
        g = w.gamma_min + w.gamma_range * s2
        m = w.s0 * e + (1.0 - w.s0) * m_prev
        log_e = np.log(np.maximum(e, TINY))
        log_m = np.log(m + w.eps) if w.eps > 0 else np.log(np.maximum(m, TINY))
        x = np.where(e > 0, np.exp(g * log_e - a * log_m), 0.0)
        X[:, t], alpha[:, t], gamma[:, t] = x, a, g
        if record:
            steps.append(dict(u=u, h_prev=h_prev, sig=sig, inner=inner, x=x, log_e=log_e, log_m=log_m))
        x_prev, m_prev = x, m
    return X, alpha, gamma, steps


def _time_backward(E, w: ControllerWeights, gX, window):
    B, T, N = E.shape
    p = w.params
    H = w.hidden
    _, _, _, steps = _time_forward(E, w, record=True)
    acc = {k: np.zeros_like(v) for k, v in p.items()}
    carry_x = np.zeros((B, N))
    carry_h = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        st = steps[t]
        gx = (gX[:, t] + carry_x) * st["x"]
        sig = st["sig"]
        g_a = -gx * st["log_m"]
        g_g = gx * st["log_e"] * w.gamma_range
        if w.per_channel:
            go = np.concatenate([g_a, g_g], axis=-1) * sig * (1.0 - sig)
        else:
            go = np.stack([g_a.sum(-1), g_g.sum(-1)], axis=-1) * sig * (1.0 - sig)
        r, z, n, a1, h1 = st["inner"]
        acc["mlp.W2"] += go.T @ h1
        acc["mlp.b2"] += go.sum(0)
        ga1 = (go @ p["mlp.W2"]) * (a1 > 0)
        h = (1.0 - z) * n + z * st["h_prev"]
        acc["mlp.W1"] += ga1.T @ h
        acc["mlp.b1"] += ga1.sum(0)
        gh = ga1 @ p["mlp.W1"] + carry_h
        g_hprev, gu = _kernels_py._gru_step_back(
            gh, st["u"], st["h_prev"], r, z, n, p["gru.W_ih"], p["gru.W_hh"], H, acc, "gru."
        )
        if window > 0 and t % window == 0:
            carry_x = np.zeros((B, N))
            carry_h = np.zeros((B, H))
        else:
            carry_x = gu[:, N:]
            carry_h = g_hprev
    return {k: acc[k] for k in TIME_NAMES}


def apcen_process(E, w: ControllerWeights, *, record=False, pure_python=False):
    """Run the adaptive SimpPCEN over an energy map.

    Returns ``(X, trajectory)``, plus an :class:`ApcenTape` when ``record``.
    Works on ``(T, N)`` or batched ``(B, T, N)`` energies.
    """
    E = _as_energy(E)
    Eb, squeeze = _batched(E)
    Eb = np.ascontiguousarray(Eb)
    if w.axis == "time":
        X, alpha, gamma, _ = _time_forward(Eb, w)
    else:
        impl = _kernels_py if pure_python else kernels
        X, alpha, gamma = impl.apcen_forward(
            Eb, w.ordered(), w.s0, w.eps, w.gamma_min, w.gamma_range, w.per_channel
        )
    if squeeze:
        X, alpha, gamma = X[0], alpha[0], gamma[0]
    traj = ParamTrajectory(alpha, gamma)
    if record:
        return X, traj, ApcenTape(Eb, w.copy(), squeeze)
    return X, traj


def apcen_backward(tape: ApcenTape | None, upstream, *, window=0, pure_python=False) -> dict:
    """Gradients of ``sum(upstream * X)`` w.r.t. every controller weight.

    Backpropagates through time via the buffered previous output (and the
    carried hidden state in the time-axis layout). ``window`` > 0 truncates
    that cross-frame path at frame indices divisible by ``window``.
    """
    if not isinstance(tape, ApcenTape):
        raise MissingTape("apcen_backward needs the tape from apcen_process(record=True)")
    if window < 0:
        raise ConfigInvalid("window must be >= 0")
    E, w = tape.E, tape.weights
    g = np.asarray(upstream, dtype=np.float64)
    g = g[None] if tape.squeeze else g
    if g.shape != E.shape:
        raise ShapeMismatch(f"upstream gradient shape {g.shape} != forward shape {E.shape}")
    g = np.ascontiguousarray(g)
    if w.axis == "time":
        return _time_backward(E, w, g, window)
    impl = _kernels_py if pure_python else kernels
    grads = impl.apcen_backward(
        E, w.ordered(), w.s0, w.eps, w.gamma_min, w.gamma_range, w.per_channel, g, window
    )
    return dict(zip(CHANNEL_NAMES, grads))


def gain_map(E, X) -> np.ndarray:
    """Output/input ratio ``X / max(E, 1e-12)``."""
    return np.asarray(X) / np.maximum(np.asarray(E), 1e-12)


# -- checkpoint format ---------------------------------------------------------

MAGIC = b"APCW"
VERSION = 1
# magic, version, flags, hidden, mlp_hidden, input_dim, n_channels, gamma_min, gamma_range, s0, eps
HEADER = struct.Struct("<4sHHIIII4d")
FLAG_PER_CHANNEL = 1
FLAG_TIME_AXIS = 2


def weights_to_bytes(w: ControllerWeights) -> bytes:
    flags = (FLAG_PER_CHANNEL if w.per_channel else 0) | (FLAG_TIME_AXIS if w.axis == "time" else 0)
    head = HEADER.pack(
        MAGIC, VERSION, flags, w.hidden, w.mlp_hidden, w.input_dim, w.n_channels,
        w.gamma_min, w.gamma_range, w.s0, w.eps,
    )  # fmt: skip
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in w.ordered())
    return head + body


def weights_from_bytes(buf: bytes, offset: int = 0):
    """Decode a controller block. Returns ``(weights, bytes_consumed)``."""
    if len(buf) - offset < HEADER.size:
        raise CorruptHeader("controller block truncated")
    magic, version, flags, H, mh, in_dim, n_ch, gmin, grange, s0, eps = HEADER.unpack_from(buf, offset)
    if magic != MAGIC:
        raise BadMagic(f"controller magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise UnsupportedFormat(f"controller format version {version}")
    axis = "time" if flags & FLAG_TIME_AXIS else "channel"
    per_channel = bool(flags & FLAG_PER_CHANNEL)
    shapes = param_shapes(H, mh, axis, n_ch, per_channel)
    names = CHANNEL_NAMES if axis == "channel" else TIME_NAMES
    pos = offset + HEADER.size
    params = {}
    for name in names:
        shape = shapes[name]
        size = int(np.prod(shape))
        end = pos + 8 * size
        if end > len(buf):
            raise CorruptHeader(f"controller block truncated inside {name}")
        params[name] = np.frombuffer(buf, dtype="<f8", count=size, offset=pos).reshape(shape).astype(np.float64)
        pos = end
    w = ControllerWeights(params, H, mh, gmin, grange, axis, per_channel, n_ch, s0, eps)
    if w.input_dim != in_dim:
        raise CorruptHeader(f"header input_dim {in_dim} inconsistent with layout ({w.input_dim})")
    return w, pos - offset


def save_weights(w: ControllerWeights, path):
    with open(path, "wb") as fh:
        fh.write(weights_to_bytes(w))


def load_weights(path) -> ControllerWeights:
    with open(path, "rb") as fh:
        buf = fh.read()
    w, used = weights_from_bytes(buf)
    if used != len(buf):
        raise CorruptHeader(f"{path}: {len(buf) - used} trailing bytes")
    return w
