"""Compare the compiled kernels with the numpy fallback.

Times the exponential smoother and the controller forward/backward passes
on random energy maps, checks that both backends agree, and prints one
row per kernel with the speedup.

    python benchmarks/bench_kernels.py --batch 8 --frames 100 --channels 40
"""

import argparse
import sys
import time

import numpy as np

from leaf_apcen import _kernels_py
from leaf_apcen import controller as ctl

try:
    from leaf_apcen import _kernels_c
except ImportError:
    _kernels_c = None


def best_of(fn, repeats):
    times = []
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def max_diff(a, b):
    if isinstance(a, tuple):
        return max(max_diff(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def cases(args):
    rng = np.random.default_rng(args.seed)
    B, T, N = args.batch, args.frames, args.channels
    E = np.ascontiguousarray(rng.uniform(0.0, 2.0, (B, T, N)) ** 2)
    s = np.full(N, 0.04)
    M0 = np.ascontiguousarray(E[:, 0])
    gM = np.ascontiguousarray(rng.normal(size=(B, T, N)))
    w = ctl.init_weights(args.hidden, args.mlp_hidden, seed=args.seed)
    ws = w.ordered()
    fixed = (w.s0, w.eps, w.gamma_min, w.gamma_range, w.per_channel)

    def ema_f(k):
        return lambda: k.ema_forward(E, s, M0)

    M = _kernels_py.ema_forward(E, s, M0)

    def ema_b(k):
        return lambda: k.ema_backward(E, s, M0, M, gM)

    def apcen_f(k):
        return lambda: k.apcen_forward(E, ws, *fixed)

    def apcen_b(k):
        return lambda: k.apcen_backward(E, ws, *fixed, gM, args.window)

    return [("ema_forward", ema_f), ("ema_backward", ema_b), ("apcen_forward", apcen_f), ("apcen_backward", apcen_b)]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--batch", type=int, default=8, help="clips per call")
    ap.add_argument("--frames", type=int, default=100, help="frames per clip")
    ap.add_argument("--channels", type=int, default=40, help="filterbank channels")
    ap.add_argument("--hidden", type=int, default=ctl.HIDDEN, help="controller GRU width")
    ap.add_argument("--mlp-hidden", type=int, default=ctl.MLP_HIDDEN, help="controller MLP width")
    ap.add_argument("--window", type=int, default=0, help="BPTT window for the backward pass")
    ap.add_argument("--repeats", type=int, default=5, help="timing repeats (best is reported)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if _kernels_c is None:
        print("compiled extension not built; only the numpy fallback is available", file=sys.stderr)
        return 1
    print(f"B={args.batch} T={args.frames} N={args.channels} H={args.hidden} repeats={args.repeats}")
    print(f"{'kernel':<16}{'python ms':>12}{'compiled ms':>14}{'speedup':>10}{'max diff':>12}")
    for name, make in cases(args):
        t_py, out_py = best_of(make(_kernels_py), args.repeats)
        t_c, out_c = best_of(make(_kernels_c), args.repeats)
        print(f"{name:<16}{1e3 * t_py:>12.2f}{1e3 * t_c:>14.2f}{t_py / t_c:>9.1f}x{max_diff(out_py, out_c):>12.1e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
