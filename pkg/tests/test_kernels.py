import os
import subprocess
import sys

import numpy as np
import pytest

from leaf_apcen import _kernels_py, kernels
from leaf_apcen import controller as ctl

_kernels_c = pytest.importorskip("leaf_apcen._kernels_c")


def _run(code, **env):
    full = dict(os.environ, **env)
    return subprocess.run([sys.executable, "-c", code], env=full, capture_output=True, text=True, check=True).stdout


def test_compiled_backend_selected_by_default():
    assert kernels.BACKEND == "compiled"
    assert _run("from leaf_apcen import kernels; print(kernels.BACKEND)", LEAF_APCEN_PURE_PYTHON="0").strip() == "compiled"


def test_environment_forces_fallback():
    out = _run("from leaf_apcen import kernels; print(kernels.BACKEND)", LEAF_APCEN_PURE_PYTHON="1")
    assert out.strip() == "python"


def test_missing_extension_falls_back():
    code = (
        "import sys; sys.modules['leaf_apcen._kernels_c'] = None\n"
        "from leaf_apcen import kernels; print(kernels.BACKEND)"
    )
    assert _run(code).strip() == "python"


@pytest.mark.parametrize("B", [1, 7, 8, 9, 17])
def test_ema_agreement(B):
    rng = np.random.default_rng(B)
    E = rng.uniform(0, 3, (B, 13, 5))
    s = rng.uniform(0.01, 1.0, 5)
    M0 = np.ascontiguousarray(E[:, 0])
    gM = rng.normal(size=E.shape)
    Mp = _kernels_py.ema_forward(E, s, M0)
    Mc = np.asarray(_kernels_c.ema_forward(E, s, M0))
    np.testing.assert_allclose(Mc, Mp, rtol=1e-14)
    for a, b in zip(_kernels_c.ema_backward(E, s, M0, Mp, gM), _kernels_py.ema_backward(E, s, M0, Mp, gM)):
        np.testing.assert_allclose(np.asarray(a), b, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("B", [1, 8, 11])
@pytest.mark.parametrize("per_channel", [True, False])
@pytest.mark.parametrize("window", [0, 3])
def test_apcen_agreement(B, per_channel, window):
    rng = np.random.default_rng(B + 10 * per_channel + window)
    w = ctl.init_weights(6, 5, seed=B, per_channel=per_channel)
    for v in w.params.values():
        v += rng.normal(0, 0.3, v.shape)
    E = rng.uniform(0, 3, (B, 9, 7))
    E[:, 2, 3] = 0.0
    gX = rng.normal(size=E.shape)
    args = (E, w.ordered(), w.s0, w.eps, w.gamma_min, w.gamma_range, per_channel)
    for a, b in zip(_kernels_c.apcen_forward(*args), _kernels_py.apcen_forward(*args)):
        np.testing.assert_allclose(np.asarray(a), b, rtol=1e-12, atol=1e-300)
    for a, b in zip(_kernels_c.apcen_backward(*args, gX, window), _kernels_py.apcen_backward(*args, gX, window)):
        np.testing.assert_allclose(np.asarray(a), b, rtol=1e-10, atol=1e-13)


def test_compiled_forward_does_not_record():
    w = ctl.init_weights(4, 4)
    with pytest.raises(ValueError):
        _kernels_c.apcen_forward(np.ones((1, 2, 3)), w.ordered(), 0.04, 1e-6, 0.2, 0.8, True, True)
