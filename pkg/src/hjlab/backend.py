"""Kernel backend selection.

The compiled extension is preferred when importable; otherwise the numpy
fallback is used.  Set HJLAB_PURE_PYTHON=1 to force the fallback (the
benchmark and the backend-parity tests import both modules directly).
"""

import os

if os.environ.get("HJLAB_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as kernels

    COMPILED = False
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]

        COMPILED = True
    except ImportError:
        from . import _kernels_py as kernels  # type: ignore[no-redef]

        COMPILED = False
