"""Uniform spatial hash grid shared by the native and pure-python backends.

Points are binned into cubic cells of side ``cell``; cell codes are linearized
and the point order is sorted by code, so a cell's contents are a contiguous
slice located by binary search. Query routines expand Chebyshev rings of
cells around the query until the answer provably cannot improve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# keeps linearized cell codes comfortably inside int64
_MAX_CELLS = 2**62


@dataclass(frozen=True)
class GridIndex:
    points: np.ndarray  # (N, 3) float64, original order
    origin: np.ndarray  # (3,) float64
    cell: float
    dims: np.ndarray  # (3,) int64
    codes: np.ndarray  # (N,) int64, sorted
    order: np.ndarray  # (N,) int64, point index sorted by cell code

    def __len__(self) -> int:
        return self.points.shape[0]


def default_cell_size(points: np.ndarray) -> float:
    """Median 4-NN distance over a deterministic subsample (~512 points)."""
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if n < 2:
        return 1.0
    step = max(1, n // 512)
    sub = pts[::step][:512]
    kth = min(4, n - 1)
    dists = np.empty(sub.shape[0])
    for i, q in enumerate(sub):
        d2 = ((pts - q) ** 2).sum(axis=1)
        dists[i] = np.sqrt(np.partition(d2, kth)[kth])
    med = float(np.median(dists))
    if med > 0 and np.isfinite(med):
        return med
    diag = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    return diag / 64.0 if diag > 0 else 1.0


def build_grid(points: np.ndarray, cell: float | None = None) -> GridIndex:
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"points must be (N, 3), got {pts.shape}")
    if pts.shape[0] == 0:
        raise ValueError("cannot index an empty point set")
    if not np.isfinite(pts).all():
        raise ValueError("points must be finite")
    if cell is None:
        cell = default_cell_size(pts)
    cell = float(cell)
    if not np.isfinite(cell) or cell <= 0:
        cell = 1.0
    origin = pts.min(axis=0)
    while True:
        ijk = np.floor((pts - origin) / cell).astype(np.int64)
        np.clip(ijk, 0, None, out=ijk)
        dims = ijk.max(axis=0) + 1
        if int(dims[0]) * int(dims[1]) * int(dims[2]) <= _MAX_CELLS:
            break
        cell *= 2.0
    code = ijk[:, 0] + dims[0] * (ijk[:, 1] + dims[1] * ijk[:, 2])
    order = np.argsort(code, kind="stable").astype(np.int64)
    return GridIndex(
        points=pts,
        origin=origin,
        cell=cell,
        dims=dims.astype(np.int64),
        codes=code[order],
        order=order,
    )
