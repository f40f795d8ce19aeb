"""Assembly kernel backend selection.

The compiled Cython extension is preferred when importable; the NumPy
reference implementation is the fallback.  Set ``SURFNS_KERNELS=numpy`` or
``SURFNS_KERNELS=cython`` to force a backend (the latter raises if the
extension is unavailable).
"""

from __future__ import annotations

import os

_forced = os.environ.get("SURFNS_KERNELS", "").strip().lower()

if _forced in ("numpy", "python"):
    from . import _kernels_np as _impl

    BACKEND = "numpy"
elif _forced in ("cython", "compiled"):
    from . import _kernels as _impl  # type: ignore[attr-defined]

    BACKEND = "cython"
elif _forced:
    raise ValueError(
        f"SURFNS_KERNELS={_forced!r} not recognised; use 'numpy' or 'cython'"
    )
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _kernels_np as _impl

        BACKEND = "numpy"

local_mass = _impl.local_mass
local_stiffness = _impl.local_stiffness
local_deformation = _impl.local_deformation
local_div_coupling = _impl.local_div_coupling
local_vector_load = _impl.local_vector_load
local_scalar_load = _impl.local_scalar_load
local_bending_force = _impl.local_bending_force

__all__ = [
    "BACKEND",
    "local_mass",
    "local_stiffness",
    "local_deformation",
    "local_div_coupling",
    "local_vector_load",
    "local_scalar_load",
    "local_bending_force",
]
