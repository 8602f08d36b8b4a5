"""Hot-kernel backend selection.

Prefers the compiled Cython core; falls back to the pure-numpy twin when the
extension is missing or when ``SCRFOCUS_PURE=1`` is set.  ``BACKEND`` names
the active implementation.
"""

import os

if os.environ.get("SCRFOCUS_PURE", "") == "1":
    from . import _pure as _impl

    BACKEND = "pure"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _pure as _impl

        BACKEND = "pure"

cell_keys = _impl.cell_keys
stream_keys = _impl.stream_keys
keyed_normals = _impl.keyed_normals
disk_mask = _impl.disk_mask
nearest_points = _impl.nearest_points
reproj_loss_grad = _impl.reproj_loss_grad
reproj_residual_l1 = _impl.reproj_residual_l1

__all__ = [
    "BACKEND",
    "cell_keys",
    "stream_keys",
    "keyed_normals",
    "disk_mask",
    "nearest_points",
    "reproj_loss_grad",
    "reproj_residual_l1",
]
