"""Backend selection for the hot network kernels.

The Cython extension is used when it was built; the numpy implementation in
``pure`` is both the fallback and the reference. ``ATTACKSEARCH_PURE=1``
forces the fallback (the backend benchmark and some tests rely on this).
"""

from __future__ import annotations

import os

from . import pure
from .pure import ACT_ID, ACT_RELU, ACT_SOFTMAX

if os.environ.get("ATTACKSEARCH_PURE", "") not in ("", "0"):
    _impl = pure
    BACKEND = "pure"
else:
    try:
        from . import _mlpcore as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = pure
        BACKEND = "pure"

mlp_forward = _impl.mlp_forward
mlp_forward_many = _impl.mlp_forward_many
mlp_vjp = _impl.mlp_vjp
mlp_vjp_many = _impl.mlp_vjp_many

__all__ = [
    "ACT_ID",
    "ACT_RELU",
    "ACT_SOFTMAX",
    "BACKEND",
    "mlp_forward",
    "mlp_forward_many",
    "mlp_vjp",
    "mlp_vjp_many",
    "pure",
]
