"""Independent reference computations used by the tests.

Nothing here imports the package under test; values are derived with
mpmath at high precision or by brute-force loops.
"""

import math

import mpmath as mp

mp.mp.dps = 50


def pcen_scalar(E, M, eps, alpha, delta, gamma):
    E, M = mp.mpf(E), mp.mpf(M)
    return (E / (M + eps) ** alpha + delta) ** gamma - mp.mpf(delta) ** gamma


def simp_scalar(E, M, eps, alpha, gamma):
    E, M = mp.mpf(E), mp.mpf(M)
    return E**gamma / (M + eps) ** alpha


def mel(f):
    return 2595 * mp.log10(1 + mp.mpf(f) / 700)


def inv_mel(m):
    return 700 * (mp.power(10, mp.mpf(m) / 2595) - 1)


def mel_centres(n, f_min, f_max):
    lo, hi = mel(f_min), mel(f_max)
    step = (hi - lo) / (n + 1)
    return [float(inv_mel(lo + k * step)) for k in range(1, n + 1)]


def gru_mlp_count(H, mh, d_in):
    gru_dir = 3 * H * d_in + 3 * H * H + 2 * 3 * H
    return 2 * gru_dir + (2 * H * mh + mh) + (mh * 2 + 2)


def gaussian_centre_weight(L, frac=0.4):
    """Centre tap of an odd length-L Gaussian (sigma = frac*L/2) normalized to sum one."""
    sigma = frac * L / 2
    half = (L - 1) // 2
    total = sum(math.exp(-(t * t) / (2 * sigma * sigma)) for t in range(-half, half + 1))
    return 1.0 / total


def brute_detection(x, centre, sigma, L, sr):
    """|sum_tau x[t+tau] k[tau]|^2 with zero padding, plain Python."""
    half = (L - 1) // 2
    k = [
        complex(math.cos(2 * math.pi * centre * t / sr), math.sin(2 * math.pi * centre * t / sr))
        * math.exp(-(t * t) / (2 * sigma * sigma)) / (math.sqrt(2 * math.pi) * sigma)
        for t in range(-half, half + 1)
    ]
    n = len(x)
    out = []
    for t in range(n):
        acc = 0j
        for j, tau in enumerate(range(-half, half + 1)):
            if 0 <= t + tau < n:
                acc += x[t + tau] * k[j]
        out.append(abs(acc) ** 2)
    return out


def central_diff(f, x, step=1e-6):
    """Central differences of scalar ``f()`` w.r.t. every entry of ``x`` (modified in place)."""
    import numpy as np

    g = np.zeros_like(x, dtype=float)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + step
        hi = f()
        x[idx] = orig - step
        lo = f()
        x[idx] = orig
        g[idx] = (hi - lo) / (2 * step)
    return g


def rel_err(a, n, floor=1e-8):
    import numpy as np

    return float(np.max(np.abs(np.asarray(a) - n)) / max(float(np.max(np.abs(n))), floor))
