"""Learnable Gabor front-end with adaptive per-channel energy normalization.

The recurrent controller and the exponential smoother run in a compiled
extension when it is available; ``leaf_apcen.kernels.BACKEND`` reports
which implementation was selected.
"""

__version__ = "0.1.0"

from .errors import LeafApcenError  # noqa: E402
from .frontend import FrontendConfig, design_filterbank, energy_map  # noqa: E402
from .normalization import (  # noqa: E402
    PcenParams,
    SimpPcenParams,
    pcen_backward,
    pcen_forward,
    simp_pcen_backward,
    simp_pcen_forward,
)
from .controller import ControllerWeights, apcen_backward, apcen_process, init_weights  # noqa: E402
from .kernels import BACKEND  # noqa: E402

__all__ = [
    "BACKEND",
    "ControllerWeights",
    "FrontendConfig",
    "LeafApcenError",
    "PcenParams",
    "SimpPcenParams",
    "apcen_backward",
    "apcen_process",
    "design_filterbank",
    "energy_map",
    "init_weights",
    "pcen_backward",
    "pcen_forward",
    "simp_pcen_backward",
    "simp_pcen_forward",
]
