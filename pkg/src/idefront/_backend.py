"""Select the compiled kernels when available, the numpy ones otherwise.

Set ``IDEFRONT_PURE_PYTHON=1`` to force the pure-Python implementation.
"""
from __future__ import annotations

import os
from types import ModuleType

from . import _fallback


def _load() -> ModuleType:
    if os.environ.get("IDEFRONT_PURE_PYTHON", "") not in ("", "0"):
        return _fallback
    try:
        from . import _core
    except ImportError:
        return _fallback
    return _core


impl: ModuleType = _load()
BACKEND: str = impl.NAME
AVAILABLE: dict[str, ModuleType] = {"python": _fallback}
try:
    from . import _core as _compiled

    AVAILABLE["cython"] = _compiled
except ImportError:
    pass


def use(name: str) -> None:
    """Switch the active backend at runtime ("python" or "cython")."""
    global impl, BACKEND
    if name not in AVAILABLE:
        raise ValueError(f"backend {name!r} is not available; have {sorted(AVAILABLE)}")
    impl = AVAILABLE[name]
    BACKEND = name
