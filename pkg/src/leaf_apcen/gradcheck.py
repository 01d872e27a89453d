"""Central-difference checks of every hand-written backward pass.

The error for a parameter group is normwise::

    max_i |analytic_i - numeric_i| / max(max_i |numeric_i|, floor)

over the checked coordinates, in double precision with step 1e-6.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import controller as ctl
from . import normalization as nz
from . import training as tr
from .frontend import FrontendConfig
from .seeding import rng_for

STEP = 1e-6
FLOOR = 1e-8
THRESHOLDS = {"pcen": 1e-4, "simp": 1e-4, "controller": 1e-4, "e2e": 1e-3}
MODULES = tuple(THRESHOLDS)


@dataclass
class GroupResult:
    module: str
    group: str
    seed: int
    rel_error: float
    worst_coord: tuple
    threshold: float

    @property
    def passed(self) -> bool:
        return bool(self.rel_error <= self.threshold)


def numeric_grad(f, x, coords=None, step=STEP):
    """Central differences of scalar ``f()`` w.r.t. array ``x`` (perturbed in place)."""
    coords = list(np.ndindex(x.shape)) if coords is None else coords
    out = np.zeros(len(coords))
    for k, c in enumerate(coords):
        orig = x[c]
        x[c] = orig + step
        hi = f()
        x[c] = orig - step
        lo = f()
        x[c] = orig
        out[k] = (hi - lo) / (2 * step)
    return out


def compare(analytic, numeric, coords, floor=FLOOR):
    diff = np.abs(analytic - numeric)
    k = int(np.argmax(diff)) if diff.size else 0
    scale = max(float(np.max(np.abs(numeric))) if numeric.size else 0.0, floor)
    return float(diff[k] / scale) if diff.size else 0.0, tuple(coords[k]) if coords else ()


def _check(module, seed, groups, f, grads, corrupt, n_coords=None, rng=None):
    """``groups``: name -> live array. ``grads``: name -> analytic gradient."""
    out = []
    for name, arr in groups.items():
        coords = list(np.ndindex(arr.shape))
        if n_coords is not None and len(coords) > n_coords:
            pick = rng.choice(len(coords), size=n_coords, replace=False)
            coords = [coords[i] for i in sorted(pick)]
        a = np.array([grads[name][c] for c in coords])
        if corrupt:
            a = a * 1.01 + 1e-3
        num = numeric_grad(f, arr, coords)
        err, where = compare(a, num, coords)
        out.append(GroupResult(module, name, seed, err, where, THRESHOLDS[module]))
    return out


def _energy(rng, shape):
    E = rng.uniform(0.05, 3.0, shape)
    E[rng.random(shape) < 0.1] *= 1e-3
    return E


def check_pcen(seed, corrupt=False):
    rng = rng_for(seed, "gradcheck", "pcen")
    T, N = int(rng.integers(2, 9)), int(rng.integers(1, 5))
    E = _energy(rng, (T, N))
    up = rng.normal(size=(T, N))
    p = nz.PcenParams(rng.uniform(0.02, 0.9, N), rng.uniform(0.3, 1.0, N),
                      rng.uniform(0.2, 3.0, N), rng.uniform(0.2, 1.0, N))  # fmt: skip
    _, cache = nz.pcen_forward(E, p, return_cache=True)
    g = nz.pcen_backward(cache, up)
    f = lambda: float(np.sum(up * nz.pcen_forward(E, p)))
    groups = {"s": p.s, "alpha": p.alpha, "delta": p.delta, "gamma": p.gamma, "E": E}
    return _check("pcen", seed, groups, f, g, corrupt)


def check_simp(seed, corrupt=False):
    rng = rng_for(seed, "gradcheck", "simp")
    T, N = int(rng.integers(2, 9)), int(rng.integers(1, 5))
    E = _energy(rng, (T, N))
    up = rng.normal(size=(T, N))
    p = nz.SimpPcenParams(rng.uniform(0.1, 0.9, N), rng.uniform(0.2, 1.0, N))
    a_el = rng.uniform(0.1, 0.9, (T, N))
    g_el = rng.uniform(0.2, 1.0, (T, N))
    out = []
    _, cache = nz.simp_pcen_forward(E, p, return_cache=True)
    g = nz.simp_pcen_backward(cache, up)
    f = lambda: float(np.sum(up * nz.simp_pcen_forward(E, p)))
    out += _check("simp", seed, {"alpha": p.alpha, "gamma": p.gamma, "E": E}, f, g, corrupt)
    _, cache = nz.simp_pcen_forward(E, p, alpha=a_el, gamma=g_el, return_cache=True)
    g = nz.simp_pcen_backward(cache, up)
    g = {"alpha[t,i]": g["alpha"], "gamma[t,i]": g["gamma"]}
    f = lambda: float(np.sum(up * nz.simp_pcen_forward(E, p, alpha=a_el, gamma=g_el)))
    out += _check("simp", seed, {"alpha[t,i]": a_el, "gamma[t,i]": g_el}, f, g, corrupt)
    return out


def check_controller(seed, corrupt=False, axis="channel", per_channel=True, window=0):
    rng = rng_for(seed, "gradcheck", "controller", axis, per_channel)
    T, N, H, mh = 4, 3, 4, 5
    w = ctl.init_weights(H, mh, seed=int(rng.integers(2**31)), axis=axis, per_channel=per_channel,
                         n_channels=N if axis == "time" else 0)  # fmt: skip
    for k, v in w.params.items():
        v += rng.normal(0.0, 0.3, v.shape)
    E = _energy(rng, (T, N))
    up = rng.normal(size=(T, N))
    _, _, tape = ctl.apcen_process(E, w, record=True)
    g = ctl.apcen_backward(tape, up, window=window)
    f = lambda: float(np.sum(up * ctl.apcen_process(E, w)[0]))
    return _check("controller", seed, w.params, f, g, corrupt)


def check_e2e(seed, corrupt=False, variants=tr.VARIANTS, n_coords=10):
    """Loss gradient of the whole pipeline at tiny sizes (N=4, T=10, H=4)."""
    rng = rng_for(seed, "gradcheck", "e2e")
    fe = FrontendConfig(n_filters=4, kernel_len=31)
    B, n = 3, 10 * fe.hop
    waves = rng.normal(0.0, 0.1, (B, n)) * np.linspace(0.2, 1.0, n)
    labels = rng.integers(0, 3, B)
    out = []
    for variant in variants:
        cfg = tr.TrainConfig(variant=variant, seed=int(rng.integers(2**31)), hidden=4, mlp_hidden=4,
                             backend_hidden=6)  # fmt: skip
        model = tr.init_model(cfg, 3, fe)
        E = tr.energies(waves, model)
        tr.fit_standardization(model, E)
        for k, v in model.trainable().items():
            if k.startswith("ctrl.") or k.startswith("backend."):
                v += rng.normal(0.0, 0.2, v.shape)
            else:
                v *= rng.uniform(0.8, 1.1, v.shape)
        model.project()
        _, _, tape = tr.forward_loss(model, E, labels, record=True)
        g = tr.backward(model, tape)
        f = lambda: tr.forward_loss(model, E, labels)[0]
        groups = {f"{variant}:{k}": v for k, v in model.trainable().items()}
        grads = {f"{variant}:{k}": v for k, v in g.items()}
        out += _check("e2e", seed, groups, f, grads, corrupt, n_coords, rng)
    return out


CHECKS = {"pcen": check_pcen, "simp": check_simp, "controller": check_controller, "e2e": check_e2e}


def run(module="all", seeds=(0,), corrupt=False) -> list:
    mods = MODULES if module == "all" else (module,)
    results = []
    for m in mods:
        for s in seeds:
            results += CHECKS[m](s, corrupt=corrupt)
    return results


def summarize(results) -> dict:
    """Worst error per (module, group)."""
    worst = {}
    for r in results:
        key = (r.module, r.group)
        if key not in worst or r.rel_error > worst[key].rel_error:
            worst[key] = r
    return worst
