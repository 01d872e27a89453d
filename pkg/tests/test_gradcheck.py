import numpy as np
import pytest

from leaf_apcen import gradcheck as gc


@pytest.mark.parametrize("module", gc.MODULES)
def test_module_passes(module):
    results = gc.run(module, seeds=range(2))
    assert results and all(r.passed for r in results), [r for r in results if not r.passed]


def test_controller_fifty_seeds():
    results = gc.run("controller", seeds=range(50))
    assert all(r.passed for r in results)
    assert max(r.rel_error for r in results) <= 1e-4


@pytest.mark.parametrize("axis,per_channel", [("channel", False), ("time", True), ("time", False)])
def test_controller_layouts(axis, per_channel):
    for seed in range(3):
        assert all(r.passed for r in gc.check_controller(seed, axis=axis, per_channel=per_channel))


@pytest.mark.parametrize("module", gc.MODULES)
def test_corruption_detected(module):
    results = gc.run(module, seeds=[0], corrupt=True)
    assert not any(r.passed for r in results)


def test_compare_uses_floor():
    err, where = gc.compare(np.array([1e-9]), np.array([0.0]), [(0,)])
    assert err == pytest.approx(0.1) and where == (0,)


def test_summarize_keeps_worst():
    a = gc.GroupResult("pcen", "s", 0, 1e-7, (0,), 1e-4)
    b = gc.GroupResult("pcen", "s", 1, 1e-6, (1,), 1e-4)
    assert gc.summarize([a, b])[("pcen", "s")] is b
