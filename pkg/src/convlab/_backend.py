"""Kernel backend selection.

The compiled core is used when it was built and ``CONVLAB_PURE_PYTHON`` is
unset; otherwise the numpy twins take over with identical signatures.
"""
import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["compiled"] = _ckernels

if _ckernels is not None and not os.environ.get("CONVLAB_PURE_PYTHON"):
    kernels = _ckernels
    NAME = "compiled"
else:
    kernels = _pykernels
    NAME = "python"


def get(name):
    """Return the kernel module registered under ``name``."""
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available; have {sorted(BACKENDS)}") from None
