"""Hot-kernel backend selection.

The compiled Cython core is preferred when present; the numpy fallback is
semantically identical. Override with STARWAVE_BACKEND={compiled,python,auto}.
"""

import os

from . import _pykernels

_choice = os.environ.get("STARWAVE_BACKEND", "auto").lower()

if _choice not in ("auto", "compiled", "python"):
    raise ValueError(f"STARWAVE_BACKEND must be auto|compiled|python, got {_choice!r}")

_impl = None
if _choice in ("auto", "compiled"):
    try:
        from . import _ckernels as _impl
    except ImportError:
        if _choice == "compiled":
            raise
        _impl = None
if _impl is None:
    _impl = _pykernels

BACKEND = _impl.BACKEND
phi1 = _impl.phi1
phi2 = _impl.phi2
volterra_m = _impl.volterra_m
volterra_m_batch = _impl.volterra_m_batch
free_propagator_apply = _impl.free_propagator_apply

pure = _pykernels


def get_backend(name):
    """Return a specific backend module by name ('compiled' or 'python')."""
    if name == "python":
        return _pykernels
    if name == "compiled":
        from . import _ckernels
        return _ckernels
    raise ValueError(name)
