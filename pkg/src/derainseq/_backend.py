"""Kernel backend selection.

Prefers the compiled extension, falls back to the pure-numpy twins.
Set DERAINSEQ_PURE_PYTHON=1 to force the fallback (useful for the
cross-backend parity tests and the benchmark).
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("DERAINSEQ_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

ssd_grid = _impl.ssd_grid
admm_sweep = _impl.admm_sweep


def backend_name():
    return "compiled" if _impl.COMPILED else "pure"
