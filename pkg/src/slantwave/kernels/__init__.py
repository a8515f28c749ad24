"""Stencil backend selection.

Imports the compiled extension when present, otherwise the NumPy fallback.
Both expose the same functions with bit-identical arithmetic, so everything
downstream is backend-agnostic.  Set SLANTWAVE_FORCE_NUMPY=1 to force the
fallback (used by the benchmark and backend-agreement tests).
"""

import os

from . import _stencil_py

COMPILED_AVAILABLE = False
_compiled = None
try:
    from . import _stencil as _compiled  # type: ignore[attr-defined]

    COMPILED_AVAILABLE = True
except ImportError:
    _compiled = None

if _compiled is not None and not os.environ.get("SLANTWAVE_FORCE_NUMPY"):
    _impl = _compiled
    BACKEND = "compiled"
else:
    _impl = _stencil_py
    BACKEND = "numpy"

step_interior_2d = _impl.step_interior_2d
step_interior_2d_eta = _impl.step_interior_2d_eta
step_interior_3d = _impl.step_interior_3d
step_interior_3d_eta = _impl.step_interior_3d_eta


def step_interior(up, uc, un, coef, inv_eta=None):
    """Single fused leapfrog interior update: un = 2*uc - up + coef*lap(uc)/eta."""
    if uc.ndim == 2:
        if inv_eta is None:
            step_interior_2d(up, uc, un, coef)
        else:
            step_interior_2d_eta(up, uc, un, inv_eta, coef)
    elif uc.ndim == 3:
        if inv_eta is None:
            step_interior_3d(up, uc, un, coef)
        else:
            step_interior_3d_eta(up, uc, un, inv_eta, coef)
    else:
        raise ValueError(f"unsupported dimension {uc.ndim}")


__all__ = [
    "BACKEND",
    "COMPILED_AVAILABLE",
    "step_interior",
    "step_interior_2d",
    "step_interior_2d_eta",
    "step_interior_3d",
    "step_interior_3d_eta",
]
