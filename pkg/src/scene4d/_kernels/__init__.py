"""Spatial kernels with a compiled core and a pure-python fallback.

The compiled extension is optional. Selection happens once at import:

* ``SCENE4D_KERNELS=auto`` (default): use the extension if it imported.
* ``SCENE4D_KERNELS=native``: require the extension, raise if missing.
* ``SCENE4D_KERNELS=python``: force the pure-python backend.

Both backends implement the same exact algorithms and accumulate squared
distances in the same order, so their outputs are bit-identical.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

from . import fallback
from .grid import GridIndex, build_grid, default_cell_size

try:
    from . import _native
except ImportError:
    _native = None


def _native_knn(grid: GridIndex, queries: np.ndarray, k: int):
    q = np.ascontiguousarray(queries, dtype=np.float64).reshape(-1, 3)
    return _native.knn(
        grid.points, grid.order, grid.codes, grid.origin, grid.cell, grid.dims, q, int(k)
    )


def _native_within_radius(grid: GridIndex, queries: np.ndarray, radius: float):
    q = np.ascontiguousarray(queries, dtype=np.float64).reshape(-1, 3)
    return _native.within_radius(
        grid.points, grid.order, grid.codes, grid.origin, grid.cell, grid.dims, q, float(radius)
    )


def _native_min_squared_distance(a: np.ndarray, b: np.ndarray) -> float:
    pa = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 3)
    pb = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 3)
    if pa.shape[0] == 0 or pb.shape[0] == 0:
        raise ValueError("min_squared_distance on empty set")
    return float(_native.min_squared_distance(pa, pb))


_PYTHON_OPS = SimpleNamespace(
    name="python",
    knn=fallback.knn,
    within_radius=fallback.within_radius,
    min_squared_distance=fallback.min_squared_distance,
)

_NATIVE_OPS = SimpleNamespace(
    name="native",
    knn=_native_knn,
    within_radius=_native_within_radius,
    min_squared_distance=_native_min_squared_distance,
)


def get_ops(name: str = "auto") -> SimpleNamespace:
    """Resolve a backend by name ("auto", "native", "python")."""
    if name == "python":
        return _PYTHON_OPS
    if name == "native":
        if _native is None:
            raise RuntimeError("compiled kernel extension is not available")
        return _NATIVE_OPS
    if name == "auto":
        return _NATIVE_OPS if _native is not None else _PYTHON_OPS
    raise ValueError(f"unknown kernel backend {name!r}")


_ops = get_ops(os.environ.get("SCENE4D_KERNELS", "auto"))

BACKEND = _ops.name
knn = _ops.knn
within_radius = _ops.within_radius
min_squared_distance = _ops.min_squared_distance

__all__ = [
    "BACKEND",
    "GridIndex",
    "build_grid",
    "default_cell_size",
    "get_ops",
    "knn",
    "min_squared_distance",
    "within_radius",
]
