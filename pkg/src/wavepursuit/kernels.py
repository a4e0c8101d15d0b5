"""Backend selection for the stencil kernels.

WAVEPURSUIT_KERNELS=auto (default) prefers the compiled extension and falls
back to the NumPy twin; =cython or =python forces one side. Both backends
are bit-compatible, so the choice only affects speed.
"""

from __future__ import annotations

import os

_choice = os.environ.get("WAVEPURSUIT_KERNELS", "auto").lower()

if _choice == "python":
    from . import _kernels_py as _impl
elif _choice == "cython":
    from . import _kernels_cy as _impl  # type: ignore[attr-defined]
elif _choice == "auto":
    try:
        from . import _kernels_cy as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl
else:
    raise ImportError(
        f"WAVEPURSUIT_KERNELS={_choice!r} not recognized (use auto, cython, or python)"
    )

backend_name: str = _impl.BACKEND
sor_sweep = _impl.sor_sweep
diffusion_step = _impl.diffusion_step
wave_step = _impl.wave_step
