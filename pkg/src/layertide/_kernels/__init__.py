"""CSR kernel backend selection.

Imports the compiled Cython kernels when available, otherwise falls back to
the NumPy implementations.  Set ``LAYERTIDE_PURE_PYTHON=1`` to force the
fallback (used by the benchmark and for debugging).
"""

import os

from . import _pykernels

if os.environ.get("LAYERTIDE_PURE_PYTHON", "0") == "1":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

csr_matvec = _impl.csr_matvec
ilu0_factor = _impl.ilu0_factor
ilu0_solve = _impl.ilu0_solve

__all__ = ["BACKEND", "csr_matvec", "ilu0_factor", "ilu0_solve"]
