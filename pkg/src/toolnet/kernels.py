"""Backend selection for the edge-array kernels.

The compiled extension is used when it imports; otherwise the pure-Python
module is. Set ``TOOLNET_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"

if not os.environ.get("TOOLNET_PURE_PYTHON"):
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
else:
    _impl = _kernels_py

reweight_rows = _impl.reweight_rows
inbound_mean = _impl.inbound_mean

__all__ = ["BACKEND", "reweight_rows", "inbound_mean"]
