"""Simulation kernels: compiled extension when available, pure Python otherwise.

Set ``NCTOMO_BACKEND=python`` to force the fallback. Both backends consume the
same xoshiro256** stream, so results are identical for a given seed.
"""

from __future__ import annotations

import os

from . import _pykernels as python_backend
from ._rng import Xoshiro, mix_seed, seed_state
from .arrays import DagArrays, TreeArrays

PLAIN = python_backend.PLAIN
DISTINCT = python_backend.DISTINCT

try:
    from . import _kernels as compiled_backend
except ImportError:  # extension not built
    compiled_backend = None

if os.environ.get("NCTOMO_BACKEND", "auto") == "python" or compiled_backend is None:
    backend = python_backend
    BACKEND = "python"
else:
    backend = compiled_backend
    BACKEND = "compiled"


def get_backend(name: str | None = None):
    if name is None:
        return backend
    if name == "python":
        return python_backend
    if name == "compiled":
        if compiled_backend is None:
            raise ImportError("compiled kernels are not built")
        return compiled_backend
    raise ValueError(f"unknown backend {name!r}")


__all__ = ["BACKEND", "DISTINCT", "DagArrays", "PLAIN", "TreeArrays", "Xoshiro", "backend",
           "compiled_backend", "get_backend", "mix_seed", "python_backend", "seed_state"]
