"""Backend selection for the per-half kernels.

The compiled extension is used when it imports; setting
CFMMBATCH_PURE=1 forces the numpy implementation.
"""

import os

from . import _kernels_py

if os.environ.get("CFMMBATCH_PURE", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = _impl.BACKEND
half_sold = _impl.half_sold
half_phi = _impl.half_phi
half_negg = _impl.half_negg
half_lnq = _impl.half_lnq
convex_terms = _impl.convex_terms
excess_grid = _impl.excess_grid

python_backend = _kernels_py


def compiled_backend():
    """The compiled module, or None if it is not built."""
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels
