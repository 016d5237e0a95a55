"""Interval-evaluation kernels with a compiled core and a pure-Python fallback.

The compiled extension is used when it was built and importable; setting
``VRANPOOL_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _pykernels

if os.environ.get("VRANPOOL_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

core_costs = _impl.core_costs
evaluate_vectors = _impl.evaluate_vectors

__all__ = ["BACKEND", "core_costs", "evaluate_vectors"]
