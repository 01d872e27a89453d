"""Backend selection for the sequential hot loops.

The compiled extension is used when it was built and imports cleanly;
otherwise the numpy reference in ``_kernels_py`` is used. Setting the
environment variable ``LEAF_APCEN_PURE_PYTHON=1`` forces the fallback.
Both backends expose ``ema_forward``, ``ema_backward``, ``apcen_forward``
and ``apcen_backward`` with identical signatures.
"""

import logging
import os

from . import _kernels_py

log = logging.getLogger(__name__)


def _load():
    if os.environ.get("LEAF_APCEN_PURE_PYTHON", "").strip() not in ("", "0"):
        return _kernels_py, "python"
    try:
        from . import _kernels_c
    except ImportError as exc:  # extension not built
        log.debug("compiled kernels unavailable (%s); using numpy fallback", exc)
        return _kernels_py, "python"
    return _kernels_c, "compiled"


impl, BACKEND = _load()

ema_forward = impl.ema_forward
ema_backward = impl.ema_backward
apcen_forward = impl.apcen_forward
apcen_backward = impl.apcen_backward
