"""Kernel backend selection.

The compiled Cython kernels are used when importable; setting
``ATTNLAB_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

from . import _pykernels

if os.environ.get("ATTNLAB_PURE_PYTHON", "") not in ("", "0"):
    kernels = _pykernels
    NAME = "python"
else:
    try:
        from . import _ckernels as kernels
        NAME = "cython"
    except ImportError:
        kernels = _pykernels
        NAME = "python"


def available():
    """Map backend name -> kernel module for every backend that imports."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
