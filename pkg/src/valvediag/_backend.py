"""Selects the kernel backend: compiled extension if present, numpy fallback.

Set ``VALVEDIAG_PURE=1`` to force the fallback even when the extension is
installed.
"""

from __future__ import annotations

import os

from . import _kernels_py

_impl = _kernels_py
if os.environ.get("VALVEDIAG_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _ext

        _impl = _ext
    except ImportError:
        pass

BACKEND = _impl.backend_name

solve_steady_state = _impl.solve_steady_state
solve_box_lad = _impl.solve_box_lad

STEADY_OK = _kernels_py.STEADY_OK
STEADY_MAXITER = _kernels_py.STEADY_MAXITER
STEADY_SINGULAR = _kernels_py.STEADY_SINGULAR
LP_OPTIMAL = _kernels_py.LP_OPTIMAL
LP_ITERLIMIT = _kernels_py.LP_ITERLIMIT
LP_BREAKDOWN = _kernels_py.LP_BREAKDOWN


def available_backends() -> dict:
    """Map backend name to kernel module, for tests and benchmarks."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels as ext

        out["compiled"] = ext
    except ImportError:
        pass
    return out
