"""Backend selection for the hot loops.

The compiled extension is used when it was built; otherwise the pure
Python/NumPy versions are used. Set ``SELFCAL_PURE_PYTHON=1`` to force the
fallback (handy for benchmarking and for cross-checking the two).
"""
import os

from . import _pykernels as python_backend

try:
    if os.environ.get("SELFCAL_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-python backend forced")
    from . import _ckernels as _active
except ImportError:
    _active = python_backend

BACKEND = _active.BACKEND
prufer_decode_batch = _active.prufer_decode_batch
depths_batch = _active.depths_batch
full_recursion = _active.full_recursion
relative_recursion = _active.relative_recursion


def compiled_backend():
    """Return the compiled module, or ``None`` if it is not available."""
    try:
        from . import _ckernels
    except ImportError:
        return None
    return _ckernels
