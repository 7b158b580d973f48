"""Hot-kernel backend selection.

The compiled Cython module is preferred when present; the NumPy reference
implementation is the fallback. Override with STILLMAP_KERNELS=python or
STILLMAP_KERNELS=compiled (the latter raises if the extension is missing).
"""

import os

_requested = os.environ.get("STILLMAP_KERNELS", "auto").strip().lower()

if _requested in ("auto", "", "compiled"):
    try:
        from . import _compiled as _impl

        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        from . import _reference as _impl

        BACKEND = "python"
elif _requested in ("python", "reference"):
    from . import _reference as _impl

    BACKEND = "python"
else:
    raise ValueError(f"unknown STILLMAP_KERNELS value: {_requested!r}")

obb_mask = _impl.obb_mask
any_obb_mask = _impl.any_obb_mask
voxel_centroids = _impl.voxel_centroids
scan_context_matrix = _impl.scan_context_matrix

__all__ = [
    "BACKEND",
    "obb_mask",
    "any_obb_mask",
    "voxel_centroids",
    "scan_context_matrix",
]
