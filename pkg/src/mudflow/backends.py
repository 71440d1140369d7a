"""Solver backend selection: compiled extension with NumPy fallback.

The compiled backend (`mudflow._kernels_cy`, built from Cython) and the
NumPy backend (`mudflow._kernels_np`) implement the same kernel interface.
Selection happens at import time; `MUDFLOW_BACKEND` forces a choice.
"""

from __future__ import annotations

import os

from . import _kernels_np

try:
    from . import _kernels_cy
except ImportError:  # extension not built on this platform
    _kernels_cy = None


def available_backends() -> list[str]:
    names = ["numpy"]
    if _kernels_cy is not None:
        names.insert(0, "compiled")
    return names


def get_backend(name: str = "auto"):
    """Return the kernel module for `name` ('auto', 'compiled', 'numpy')."""
    if name == "auto":
        name = os.environ.get("MUDFLOW_BACKEND", "auto")
    if name == "auto":
        return _kernels_cy if _kernels_cy is not None else _kernels_np
    if name == "compiled":
        if _kernels_cy is None:
            raise RuntimeError("compiled backend requested but the extension is not built")
        return _kernels_cy
    if name == "numpy":
        return _kernels_np
    raise ValueError(f"unknown backend {name!r}")
