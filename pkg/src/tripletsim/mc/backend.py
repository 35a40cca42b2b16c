"""Kernel backend selection.

The compiled kernel is used when it was built; otherwise the numpy kernel.
``TRIPLETSIM_BACKEND=python`` forces the numpy kernel and
``TRIPLETSIM_BACKEND=compiled`` makes a missing extension an import error.
"""
from __future__ import annotations

import logging
import os

from . import _fallback

log = logging.getLogger(__name__)

BACKEND_ENV_VAR = "TRIPLETSIM_BACKEND"

try:
    from . import _kernel as _compiled
except ImportError:  # extension not built
    _compiled = None

KERNELS = {"python": _fallback.simulate_range}
if _compiled is not None:
    KERNELS["compiled"] = _compiled.simulate_range


def _select() -> str:
    choice = os.environ.get(BACKEND_ENV_VAR, "auto").strip().lower()
    if choice == "python":
        return "python"
    if choice == "compiled":
        if _compiled is None:
            raise ImportError(f"{BACKEND_ENV_VAR}=compiled but the extension is not built")
        return "compiled"
    if choice != "auto":
        raise ValueError(f"{BACKEND_ENV_VAR} must be auto, python or compiled; got {choice!r}")
    if _compiled is None:
        log.debug("compiled MC kernel unavailable, using numpy fallback")
        return "python"
    return "compiled"


ACTIVE = _select()


def get_kernel(name: str | None = None):
    name = name or ACTIVE
    try:
        return KERNELS[name]
    except KeyError:
        raise ValueError(f"MC backend {name!r} is not available "
                         f"(available: {', '.join(sorted(KERNELS))})") from None
