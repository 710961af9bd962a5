"""Backend selection for the hot kernels.

The compiled Cython module is used when it imports; otherwise the numpy fallback.
Set ``LEAFPRESSURE_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _fallback

if os.environ.get("LEAFPRESSURE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback
        BACKEND = "python"

pairwise_sum = _impl.pairwise_sum
greedy_separated = _impl.greedy_separated
perturbed_frames_1d = _impl.perturbed_frames_1d


def backends():
    """Return the available kernel modules keyed by name."""
    found = {"python": _fallback}
    try:
        from . import _kernels
        found["cython"] = _kernels
    except ImportError:
        pass
    return found
