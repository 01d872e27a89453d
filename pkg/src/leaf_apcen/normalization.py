"""Per-channel energy normalization: EMA smoother, PCEN and SimpPCEN.

All arrays are float64. Energy maps are ``(T, N)`` or batched ``(B, T, N)``;
per-channel parameters are ``(N,)``. The EMA is started from the first
frame (``M[-1] = E[0]``) unless an explicit initial state is given.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigInvalid, MissingForwardCache, NonFiniteInput, ShapeMismatch

S0 = 0.04
EPS = 1e-6
TINY = 1e-12  # floor inside logarithms

# PCEN initial values
ALPHA0 = 0.96
DELTA0 = 2.0
GAMMA0 = 0.5
# SimpPCEN initial values; alpha-hat = alpha0 * gamma0
SIMP_ALPHA0 = ALPHA0 * GAMMA0
SIMP_GAMMA0 = GAMMA0

# projection bounds applied after optimizer steps
_S_RANGE = (1e-4, 1.0)
_OPEN_UNIT = (1e-6, 1.0 - 1e-6)
_GAMMA_FLOOR = 1e-3


def _as_energy(E) -> np.ndarray:
    E = np.asarray(E, dtype=np.float64)
    if E.ndim not in (2, 3):
        raise ShapeMismatch(f"energy map must be (T, N) or (B, T, N), got shape {E.shape}")
    if not np.all(np.isfinite(E)):
        raise NonFiniteInput("energy map contains NaN or infinity")
    if np.any(E < 0):
        raise NonFiniteInput("energy map contains negative values")
    return E


def _batched(E):
    return (E[None], True) if E.ndim == 2 else (E, False)


def _channel_vector(v, n, name) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 0:
        return np.full(n, float(v))
    if v.shape != (n,):
        raise ShapeMismatch(f"{name} must be scalar or ({n},), got shape {v.shape}")
    return v


def _reduce_to(grad, shape):
    """Sum a broadcast gradient back down to ``shape`` (numpy broadcasting rules)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


# -- parameters ----------------------------------------------------------------


@dataclass
class PcenParams:
    s: np.ndarray
    alpha: np.ndarray
    delta: np.ndarray
    gamma: np.ndarray
    eps: float = EPS

    @classmethod
    def initial(cls, n_channels: int, eps: float = EPS) -> "PcenParams":
        full = lambda v: np.full(n_channels, v)
        return cls(full(S0), full(ALPHA0), full(DELTA0), full(GAMMA0), eps)

    def __post_init__(self):
        for name in ("s", "alpha", "delta", "gamma"):
            setattr(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=np.float64)))
        if not (self.s.shape == self.alpha.shape == self.delta.shape == self.gamma.shape):
            raise ShapeMismatch("PCEN parameter vectors must share one shape")
        if self.eps <= 0:
            raise ConfigInvalid("PCEN needs eps > 0")
        if np.any(self.s <= 0) or np.any(self.s > 1):
            raise ConfigInvalid("smoothing coefficients must lie in (0, 1]")
        if np.any(self.gamma <= 0) or np.any(self.delta < 0):
            raise ConfigInvalid("PCEN needs gamma > 0 and delta >= 0")

    def arrays(self) -> dict:
        return {"s": self.s, "alpha": self.alpha, "delta": self.delta, "gamma": self.gamma}

    def project(self):
        """Clamp into the valid ranges in place (used after optimizer steps)."""
        np.clip(self.s, *_S_RANGE, out=self.s)
        np.maximum(self.gamma, _GAMMA_FLOOR, out=self.gamma)
        np.maximum(self.delta, 0.0, out=self.delta)


@dataclass
class SimpPcenParams:
    alpha: np.ndarray
    gamma: np.ndarray
    s: float = S0
    eps: float = EPS

    @classmethod
    def initial(cls, n_channels: int, eps: float = EPS) -> "SimpPcenParams":
        return cls(np.full(n_channels, SIMP_ALPHA0), np.full(n_channels, SIMP_GAMMA0), S0, eps)

    def __post_init__(self):
        self.alpha = np.atleast_1d(np.asarray(self.alpha, dtype=np.float64))
        self.gamma = np.atleast_1d(np.asarray(self.gamma, dtype=np.float64))
        if self.alpha.shape != self.gamma.shape:
            raise ShapeMismatch("alpha and gamma must share one shape")
        if not 0 < self.s <= 1:
            raise ConfigInvalid("smoothing coefficient must lie in (0, 1]")
        if self.eps < 0:
            raise ConfigInvalid("eps must be >= 0")

    def arrays(self) -> dict:
        return {"alpha": self.alpha, "gamma": self.gamma}

    def project(self):
        np.clip(self.alpha, *_OPEN_UNIT, out=self.alpha)
        np.clip(self.gamma, _OPEN_UNIT[0], 1.0, out=self.gamma)


# -- EMA -----------------------------------------------------------------------


def ema_smooth(E, s, M_init=None) -> np.ndarray:
    """``M[t] = s*E[t] + (1 - s)*M[t-1]``; ``M[-1]`` defaults to ``E[0]``."""
    E = _as_energy(E)
    Eb, squeeze = _batched(E)
    B, T, N = Eb.shape
    s = _channel_vector(s, N, "s")
    if np.any(s <= 0) or np.any(s > 1):
        raise ConfigInvalid("smoothing coefficients must lie in (0, 1]")
    if T == 0:
        return np.zeros_like(E)
    if M_init is None:
        M0 = Eb[:, 0].copy()
    else:
        M0 = np.asarray(M_init, dtype=np.float64)
        if M0.shape not in ((N,), (B, N)):
            raise ShapeMismatch(f"M_init must have shape ({N},) or ({B}, {N}), got {M0.shape}")
        if np.any(M0 < 0):
            raise ConfigInvalid("M_init must be non-negative")
        M0 = np.ascontiguousarray(np.broadcast_to(M0, (B, N)))
    M = kernels.ema_forward(np.ascontiguousarray(Eb), s, M0)
    return M[0] if squeeze else M


def _ema_backward(E, s, M, gM):
    """Gradient of the first-frame-initialized EMA. Returns ``(gE, gs)``."""
    M0 = np.ascontiguousarray(E[:, 0])
    gE, gs, gM0 = kernels.ema_backward(
        np.ascontiguousarray(E), s, M0, np.ascontiguousarray(M), np.ascontiguousarray(gM)
    )
    gE = np.array(gE)
    gE[:, 0] += gM0
    return gE, np.asarray(gs)


# -- PCEN ----------------------------------------------------------------------


@dataclass
class PcenCache:
    E: np.ndarray  # always batched
    M: np.ndarray
    ratio: np.ndarray  # E / (M + eps)**alpha
    params: PcenParams
    squeeze: bool


def pcen_apply(E, M, alpha, delta, gamma, eps=EPS):
    """Elementwise PCEN for a given smoothed energy ``M``."""
    E = np.asarray(E, dtype=np.float64)
    ratio = E * np.exp(-np.asarray(alpha) * np.log(np.asarray(M, dtype=np.float64) + eps))
    return (ratio + delta) ** gamma - np.power(delta, gamma)


def pcen_forward(E, p: PcenParams, *, return_cache=False):
    """``(E / (M + eps)**alpha + delta)**gamma - delta**gamma`` per channel."""
    E = _as_energy(E)
    Eb, squeeze = _batched(E)
    N = Eb.shape[-1]
    if p.s.shape != (N,):
        raise ShapeMismatch(f"parameters cover {p.s.shape[0]} channels, energy has {N}")
    M = ema_smooth(Eb, p.s)
    ratio = Eb * np.exp(-p.alpha * np.log(M + p.eps))
    out = (ratio + p.delta) ** p.gamma - p.delta**p.gamma
    if not np.all(np.isfinite(out)):
        raise NonFiniteInput("PCEN output is not finite")
    out = out[0] if squeeze else out
    if return_cache:
        return out, PcenCache(Eb, M, ratio, p, squeeze)
    return out


def pcen_backward(cache: PcenCache | None, upstream) -> dict:
    """Gradients of ``sum(upstream * out)`` w.r.t. ``s, alpha, delta, gamma`` and ``E``.

    Parameter gradients are per channel, summed over batch and frames. The
    ``s`` gradient includes backpropagation through the EMA recursion.
    """
    if not isinstance(cache, PcenCache):
        raise MissingForwardCache("pcen_backward needs the cache from pcen_forward(return_cache=True)")
    p, E, M, r = cache.params, cache.E, cache.M, cache.ratio
    g = np.asarray(upstream, dtype=np.float64)
    g = g[None] if cache.squeeze else g
    if g.shape != E.shape:
        raise ShapeMismatch(f"upstream gradient shape {g.shape} != forward shape {E.shape}")
    base = r + p.delta
    pow_g = base**p.gamma
    dy_dr = p.gamma * pow_g / base
    log_m = np.log(M + p.eps)
    with np.errstate(divide="ignore"):
        log_delta = np.where(p.delta > 0, np.log(np.maximum(p.delta, TINY)), 0.0)
        delta_term = np.where(p.delta > 0, p.gamma * p.delta ** (p.gamma - 1.0), 0.0)
    log_base = np.log(np.maximum(base, TINY))

    g_r = g * dy_dr
    grads = {
        "alpha": np.sum(-g_r * r * log_m, axis=(0, 1)),
        "delta": np.sum(g * dy_dr, axis=(0, 1)) - np.sum(g, axis=(0, 1)) * delta_term,
        "gamma": np.sum(g * (pow_g * log_base), axis=(0, 1))
        - np.sum(g, axis=(0, 1)) * (p.delta**p.gamma) * log_delta,
    }
    gM = -g_r * p.alpha * r / (M + p.eps)
    gE_ema, gs = _ema_backward(E, p.s, M, gM)
    grads["s"] = gs
    gE = g_r * np.exp(-p.alpha * log_m) + gE_ema
    grads["E"] = gE[0] if cache.squeeze else gE
    return grads


# -- SimpPCEN ------------------------------------------------------------------


@dataclass
class SimpPcenCache:
    E: np.ndarray
    M: np.ndarray
    out: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray
    s: float
    eps: float
    internal_m: bool
    squeeze: bool


def simp_pcen_apply(E, M, alpha, gamma, eps):
    """Elementwise ``E**gamma / (M + eps)**alpha`` with ``0**gamma := 0``."""
    log_e = np.log(np.maximum(E, TINY))
    log_m = np.log(M + eps) if eps > 0 else np.log(np.maximum(M, TINY))
    return np.where(E > 0, np.exp(gamma * log_e - alpha * log_m), 0.0)


def simp_pcen_forward(E, p: SimpPcenParams, M=None, *, alpha=None, gamma=None, return_cache=False):
    """SimpPCEN ``E**gamma / (M + eps)**alpha``.

    ``alpha``/``gamma`` override the parameter vectors and may be any shape
    that broadcasts against ``E`` (per channel or per element). ``M`` may be
    supplied to bypass the built-in EMA.
    """
    E = _as_energy(E)
    Eb, squeeze = _batched(E)
    alpha = np.asarray(p.alpha if alpha is None else alpha, dtype=np.float64)
    gamma = np.asarray(p.gamma if gamma is None else gamma, dtype=np.float64)
    try:
        np.broadcast_shapes(alpha.shape, gamma.shape, E.shape)
    except ValueError as exc:
        raise ShapeMismatch(f"exponents {alpha.shape}/{gamma.shape} vs energy {E.shape}") from exc
    internal = M is None
    if internal:
        Mb = ema_smooth(Eb, p.s)
    else:
        M = np.asarray(M, dtype=np.float64)
        if M.shape != E.shape:
            raise ShapeMismatch(f"M shape {M.shape} != energy shape {E.shape}")
        if not np.all(np.isfinite(M)) or np.any(M < 0):
            raise NonFiniteInput("smoothed energy must be finite and non-negative")
        Mb = M[None] if squeeze else M
    a_b = alpha[None] if squeeze and alpha.ndim == 2 else alpha
    g_b = gamma[None] if squeeze and gamma.ndim == 2 else gamma
    out = simp_pcen_apply(Eb, Mb, a_b, g_b, p.eps)
    if not np.all(np.isfinite(out)):
        raise NonFiniteInput("SimpPCEN output is not finite")
    res = out[0] if squeeze else out
    if return_cache:
        return res, SimpPcenCache(Eb, Mb, out, alpha, gamma, p.s, p.eps, internal, squeeze)
    return res


def simp_pcen_backward(cache: SimpPcenCache | None, upstream) -> dict:
    """Gradients of ``sum(upstream * out)`` w.r.t. ``alpha``, ``gamma`` and ``E``.

    ``alpha``/``gamma`` gradients have the shape of the exponents used in the
    forward pass. The ``E`` gradient includes the path through the EMA when
    the forward pass computed ``M`` itself.
    """
    if not isinstance(cache, SimpPcenCache):
        raise MissingForwardCache(
            "simp_pcen_backward needs the cache from simp_pcen_forward(return_cache=True)"
        )
    E, M, out = cache.E, cache.M, cache.out
    g = np.asarray(upstream, dtype=np.float64)
    g = g[None] if cache.squeeze else g
    if g.shape != E.shape:
        raise ShapeMismatch(f"upstream gradient shape {g.shape} != forward shape {E.shape}")
    squeeze_e = cache.squeeze
    alpha = cache.alpha[None] if squeeze_e and cache.alpha.ndim == 2 else cache.alpha
    gamma = cache.gamma[None] if squeeze_e and cache.gamma.ndim == 2 else cache.gamma
    go = g * out  # zero where E == 0
    log_e = np.log(np.maximum(E, TINY))
    shifted = M + cache.eps if cache.eps > 0 else np.maximum(M, TINY)
    log_m = np.log(shifted)
    g_gamma = _reduce_to(go * log_e, gamma.shape)
    g_alpha = _reduce_to(-go * log_m, alpha.shape)
    gE = np.where(E > 0, go * gamma / np.maximum(E, TINY), 0.0)
    if cache.internal_m:
        gM = -go * alpha / shifted
        s = np.full(E.shape[-1], cache.s)
        gE_ema, _ = _ema_backward(E, s, M, gM)
        gE = gE + gE_ema
    if squeeze_e:
        g_alpha = g_alpha[0] if cache.alpha.ndim == 2 else g_alpha
        g_gamma = g_gamma[0] if cache.gamma.ndim == 2 else g_gamma
        gE = gE[0]
    return {"alpha": g_alpha, "gamma": g_gamma, "E": gE}


# -- analysis ------------------------------------------------------------------


def percentile_range_db(values, lo=5.0, hi=95.0, floor=1e-12) -> float:
    """Spread in dB (``10*log10``) between two percentiles of the positive entries."""
    v = np.asarray(values, dtype=np.float64).ravel()
    v = v[v > floor]
    if v.size == 0:
        return 0.0
    p_lo, p_hi = np.percentile(v, [lo, hi])
    return float(10.0 * np.log10(p_hi / p_lo))
