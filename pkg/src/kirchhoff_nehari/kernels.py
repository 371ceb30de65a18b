"""Backend switch for the element kernels.

Set ``KIRCHHOFF_NEHARI_KERNELS=numpy`` to force the pure-numpy path; the
default is ``numba`` and falls back to numpy when numba cannot be imported.
The lumped power sum always runs in numpy (its vectorized pow is faster).
"""

import logging
import os

from . import _kernels_numpy

logger = logging.getLogger(__name__)

ENV_FLAG = "KIRCHHOFF_NEHARI_KERNELS"

_requested = os.environ.get(ENV_FLAG, "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"{ENV_FLAG} must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numba":
    try:
        from . import _kernels_numba as _impl
        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba is a declared dependency
        logger.warning("numba unavailable, using numpy kernels")
        from . import _kernels_numpy as _impl
        BACKEND = "numpy"
else:
    from . import _kernels_numpy as _impl
    BACKEND = "numpy"

element_gradients = _impl.element_gradients
gradient_power_sums = _impl.gradient_power_sums
assemble_flux = _impl.assemble_flux
# numpy's vectorized pow beats a scalar loop on this one, so both backends share it
lumped_power_sum = _kernels_numpy.lumped_power_sum
