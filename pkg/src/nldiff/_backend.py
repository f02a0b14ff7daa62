"""Pick the compiled core when it is importable, else the numpy fallback.

Set ``NLDIFF_BACKEND=python`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _pure

NAME = "python"
core = _pure

if os.environ.get("NLDIFF_BACKEND", "").lower() not in ("python", "pure", "numpy"):
    try:
        from . import _core as core  # type: ignore[no-redef]

        NAME = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        core = _pure


def get(name: str | None = None):
    """Return the kernel module ``name`` (``"cython"`` or ``"python"``), default active."""
    if name is None:
        return core
    if name == "python":
        return _pure
    if name == "cython":
        from . import _core

        return _core
    raise ValueError(f"unknown backend {name!r}")


def threads() -> int:
    """Worker cap from ``NLDIFF_THREADS`` (default: CPU count)."""
    raw = os.environ.get("NLDIFF_THREADS")
    if raw:
        return max(1, int(raw))
    return os.cpu_count() or 1
