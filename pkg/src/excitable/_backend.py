"""Kernel selection: the compiled extension when importable, else the Python mirror.

Set ``EXCITABLE_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import importlib
import os
from types import ModuleType

from . import _pykernel


def _load_compiled() -> ModuleType | None:
    try:
        return importlib.import_module("excitable._kernel")
    except ImportError:
        return None


_compiled = _load_compiled()

if os.environ.get("EXCITABLE_PURE_PYTHON", "").strip() not in ("", "0") or _compiled is None:
    kernel: ModuleType = _pykernel
    BACKEND = "python"
else:
    kernel = _compiled
    BACKEND = "compiled"


def get_kernel(name: str | None = None) -> ModuleType:
    """Kernel module by name ("compiled" or "python"); ``None`` gives the active one."""
    if name is None:
        return kernel
    if name == "python":
        return _pykernel
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernel is not built; run `pip install -e . --no-build-isolation`")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def compiled_available() -> bool:
    return _compiled is not None
