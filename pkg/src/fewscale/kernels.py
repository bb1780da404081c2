"""Selects the episode-evaluation kernel backend at import time.

The compiled extension is preferred; the pure-numpy twin is the fallback.
Set FEWSCALE_KERNELS=python (or =cython) to force a backend; `auto` and
unset mean "compiled if available".
"""

from __future__ import annotations

import os

from .errors import ArgumentError

_requested = os.environ.get("FEWSCALE_KERNELS", "auto").strip().lower()

if _requested in ("auto", "", "cython"):
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _requested == "cython":
            raise
        from . import _kernels_py as _impl
elif _requested in ("python", "numpy"):
    from . import _kernels_py as _impl
else:
    raise ArgumentError(
        f"FEWSCALE_KERNELS must be auto, cython, or python, got {_requested!r}"
    )

BACKEND: str = _impl.BACKEND

proto_means = _impl.proto_means
proto_predict = _impl.proto_predict
matching_predict = _impl.matching_predict
head_loss = _impl.head_loss
head_grad = _impl.head_grad
head_fit = _impl.head_fit
head_predict = _impl.head_predict


def backend_name() -> str:
    """Name of the active kernel backend ("cython" or "python")."""
    return BACKEND
