"""Kernel backend selection.

Prefers the compiled extension; falls back to the pure-numpy kernels
when the extension is missing or when CORRPIN_DISABLE_EXT is set.  The
log-domain kernels only exist in numpy form (they are off the hot path).
"""

from __future__ import annotations

import os

from . import _kernels_py
from ._kernels_py import log_matvec_left, log_matvec_right  # noqa: F401

if os.environ.get("CORRPIN_DISABLE_EXT"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels_cy as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

matvec_right = _impl.matvec_right
matvec_left = _impl.matvec_left
dp_scatter = _impl.dp_scatter


def have_compiled() -> bool:
    return BACKEND == "compiled"
