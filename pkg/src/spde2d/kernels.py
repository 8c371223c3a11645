"""Kernel backend selection.

Imports the compiled kernels when available, otherwise the pure-NumPy
fallback.  Set ``SPDE2D_PURE_PYTHON=1`` to force the fallback.  Both
backends produce bit-identical output, so the choice only affects speed.
"""

import os

_forced = os.environ.get("SPDE2D_PURE_PYTHON", "0") not in ("", "0")

if _forced:
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels_c as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl

BACKEND = _impl.BACKEND_NAME
philox_raw_block = _impl.philox_raw_block
normal_block = _impl.normal_block
ou_step = _impl.ou_step
sq_diff_accum = _impl.sq_diff_accum
