"""Kernel dispatch: the compiled extension when importable, numpy otherwise.

Set ``MPQW_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

BACKEND = "python"
_impl = _fallback
if not os.environ.get("MPQW_PURE_PYTHON"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback

DIST, BOSON, FERMION = _fallback.DIST, _fallback.BOSON, _fallback.FERMION


def get(backend=None):
    """Kernel module for ``backend`` in {None, "compiled", "python"}."""
    if backend is None:
        return _impl
    if backend == "python":
        return _fallback
    if backend == "compiled":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {backend!r}")
