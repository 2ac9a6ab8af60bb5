"""Kernel selection: compiled extension when importable, numpy otherwise.

Set ``QLOCK_BACKEND=python`` to force the numpy kernels.
"""
from __future__ import annotations

import os

from . import _pykernels

kernels = _pykernels
name = "python"

if os.environ.get("QLOCK_BACKEND", "").lower() != "python":
    try:
        from . import _ckernels  # type: ignore[attr-defined]
    except ImportError:  # pragma: no cover - depends on the build
        pass
    else:
        kernels = _ckernels
        name = "cython"


def get(backend: str | None = None):
    """Return a kernel module by name (``"cython"``, ``"python"``) or the default."""
    if backend is None:
        return kernels
    if backend == "python":
        return _pykernels
    if backend == "cython":
        from . import _ckernels  # type: ignore[attr-defined]

        return _ckernels
    raise ValueError(f"unknown backend {backend!r}")
