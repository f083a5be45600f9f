"""Backend selection for the hot kernels.

The compiled extension ``_ckernels`` is used when it imports; otherwise the
numpy implementation in ``_kernels_py`` is used. Setting the environment
variable ``MIMOBC_BACKEND=python`` forces the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("MIMOBC_BACKEND", "").lower() != "python":
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        pass

waterfill = _impl.waterfill
successive_norms = _impl.successive_norms
mac_eval = _impl.mac_eval
weighted_mac_solve = _impl.weighted_mac_solve
project_capped_simplex = _kernels_py.project_capped_simplex


def available_backends() -> dict:
    """Map backend name to module for every importable implementation."""
    out = {"python": _kernels_py}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
