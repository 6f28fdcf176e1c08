"""Hot inner loops, JIT-compiled with numba unless disabled.

Set ``SHOTKIT_DISABLE_NUMBA=1`` to force the pure-numpy implementations (also
used automatically when numba cannot be imported). Both paths return identical
results; ``BACKEND`` reports which one is active.
"""
import importlib
import os

from . import numpy_impl

_disabled = os.environ.get("SHOTKIT_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

def _load_numba():
    if _disabled:
        return None
    try:
        mod = importlib.import_module(__name__ + ".numba_impl")
    except ImportError:  # pragma: no cover - numba is a declared dependency
        return None
    return mod


numba_impl = _load_numba()

_impl = numba_impl if numba_impl is not None else numpy_impl
BACKEND = "numba" if _impl is numba_impl else "numpy"

fps_greedy = _impl.fps_greedy
nms_1d = _impl.nms_1d
greedy_match = _impl.greedy_match

__all__ = ["BACKEND", "fps_greedy", "nms_1d", "greedy_match", "numpy_impl", "numba_impl"]
