"""Kernel selection: compiled extension when importable, numpy otherwise.

Selection is per kernel.  ``confusion`` is a single counting pass and the
compiled loop beats ``np.bincount`` by roughly 2x.  ``sep2d`` is two small
matrix products, where numpy's BLAS path is as fast or faster than the
compiled loop at every shape the model uses, so numpy is used in both modes.
The compiled ``sep2d`` stays in the extension for the benchmark and the
equivalence tests.

Set ``CAUSALTUNE_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

if os.environ.get("CAUSALTUNE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
    KERNEL_BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        KERNEL_BACKEND = "cython"
    except ImportError:
        _impl = _fallback
        KERNEL_BACKEND = "python"

sep2d = _fallback.sep2d
confusion = _impl.confusion

__all__ = ["KERNEL_BACKEND", "sep2d", "confusion"]
