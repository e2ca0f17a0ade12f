"""Backend selection for the hot phasor-sum kernels.

The compiled extension is used when it was built; otherwise, or when
``QPM_NOISE_PURE=1`` is set, the numpy implementation is used.
"""
import os

from . import _kernels_py

try:
    if os.environ.get("QPM_NOISE_PURE", "") not in ("", "0"):
        raise ImportError("pure-Python backend requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

DEFAULT_BACKEND = "compiled" if _compiled is not None else "python"


def get(backend=None):
    name = DEFAULT_BACKEND if backend is None else backend
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available; have {sorted(BACKENDS)}") from None
