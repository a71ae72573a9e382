"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the numpy
implementation is used. ``IPG_BACKEND=python`` forces the fallback.
"""

from __future__ import annotations

import logging
import os

from . import _pykernels

log = logging.getLogger(__name__)

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels.Kernel}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels.Kernel


def _default_backend() -> str:
    requested = os.environ.get("IPG_BACKEND", "").strip().lower()
    if requested:
        if requested not in BACKENDS:
            log.warning("IPG_BACKEND=%s unavailable, using fallback", requested)
            return "cython" if "cython" in BACKENDS else "python"
        return requested
    return "cython" if "cython" in BACKENDS else "python"


BACKEND = _default_backend()


def make_kernel(packed, backend: str | None = None):
    return BACKENDS[backend or BACKEND](packed)
