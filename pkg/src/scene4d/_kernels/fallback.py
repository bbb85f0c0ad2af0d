"""Pure-python kernel backend.

``knn`` runs the same ring-expansion search over the spatial hash grid as the
compiled backend, one query at a time; the radius and min-distance kernels use
chunked numpy. Squared distances are accumulated as ``(dx*dx + dy*dy) + dz*dz``
everywhere so results are bit-identical to the native backend.
"""

from __future__ import annotations

import bisect

import numpy as np

from .grid import GridIndex

_CHUNK = 256


def _cell_slice(codes: np.ndarray, code: int) -> tuple[int, int]:
    lo = int(np.searchsorted(codes, code, side="left"))
    hi = int(np.searchsorted(codes, code, side="right"))
    return lo, hi


def knn(grid: GridIndex, queries: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    pts = grid.points
    n = pts.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range for {n} points")
    q = np.ascontiguousarray(queries, dtype=np.float64)
    m = q.shape[0]
    idx_out = np.empty((m, k), dtype=np.int64)
    d2_out = np.empty((m, k), dtype=np.float64)
    ox, oy, oz = (float(v) for v in grid.origin)
    h = grid.cell
    dx_, dy_, dz_ = (int(v) for v in grid.dims)
    codes = grid.codes
    order = grid.order
    px = pts[:, 0]
    py = pts[:, 1]
    pz = pts[:, 2]

    for mi in range(m):
        qx, qy, qz = float(q[mi, 0]), float(q[mi, 1]), float(q[mi, 2])
        qcx = int(np.floor((qx - ox) / h))
        qcy = int(np.floor((qy - oy) / h))
        qcz = int(np.floor((qz - oz) / h))
        rho_max = max(
            max(abs(qcx), abs(dx_ - 1 - qcx)),
            max(abs(qcy), abs(dy_ - 1 - qcy)),
            max(abs(qcz), abs(dz_ - 1 - qcz)),
        )
        best: list[tuple[float, int]] = []
        # rings closer than the box hold no cells; jump straight to it
        rho = max(
            _deficit(qcx, dx_), _deficit(qcy, dy_), _deficit(qcz, dz_)
        )
        while rho <= rho_max:
            for cx, cy, cz in _shell(qcx, qcy, qcz, rho, dx_, dy_, dz_):
                code = cx + dx_ * (cy + dy_ * cz)
                lo, hi = _cell_slice(codes, code)
                for j in range(lo, hi):
                    pi = int(order[j])
                    ddx = qx - float(px[pi])
                    ddy = qy - float(py[pi])
                    ddz = qz - float(pz[pi])
                    d2 = (ddx * ddx + ddy * ddy) + ddz * ddz
                    cand = (d2, pi)
                    if len(best) < k:
                        bisect.insort(best, cand)
                    elif cand < best[-1]:
                        best.pop()
                        bisect.insort(best, cand)
            # unseen points sit in rings > rho, hence at distance >= rho*h;
            # strict comparison so equal-distance lower-index points are safe
            if len(best) == k and best[-1][0] < (rho * h) * (rho * h):
                break
            rho += 1
        for j, (d2, pi) in enumerate(best):
            d2_out[mi, j] = d2
            idx_out[mi, j] = pi
    return idx_out, d2_out


def _deficit(qc: int, dim: int) -> int:
    """Rings needed before the shell can reach the [0, dim) slab on one axis."""
    if qc < 0:
        return -qc
    if qc >= dim:
        return qc - dim + 1
    return 0


def _shell(qx: int, qy: int, qz: int, rho: int, dx: int, dy: int, dz: int):
    """Cells at Chebyshev distance exactly rho, clipped to the grid.

    Face rows are enumerated separately from the two interior x columns so
    rings that barely graze the grid cost only their in-box cells, not a
    sweep over the whole (y, z) range.
    """
    if rho == 0:
        if 0 <= qx < dx and 0 <= qy < dy and 0 <= qz < dz:
            yield qx, qy, qz
        return
    x_lo = max(qx - rho, 0)
    x_hi = min(qx + rho, dx - 1)
    y_lo = max(qy - rho, 0)
    y_hi = min(qy + rho, dy - 1)
    x_cols = [cx for cx in (qx - rho, qx + rho) if 0 <= cx < dx]
    for cz in range(max(qz - rho, 0), min(qz + rho, dz - 1) + 1):
        if abs(cz - qz) == rho:
            for cy in range(y_lo, y_hi + 1):
                for cx in range(x_lo, x_hi + 1):
                    yield cx, cy, cz
            continue
        for cy in (qy - rho, qy + rho):
            if 0 <= cy < dy:
                for cx in range(x_lo, x_hi + 1):
                    yield cx, cy, cz
        if x_cols:
            for cy in range(max(qy - rho + 1, 0), min(qy + rho - 1, dy - 1) + 1):
                for cx in x_cols:
                    yield cx, cy, cz


def within_radius(grid: GridIndex, queries: np.ndarray, radius: float) -> np.ndarray:
    """Boolean mask: query i is within ``radius`` of some grid point."""
    q = np.ascontiguousarray(queries, dtype=np.float64)
    r2 = float(radius) * float(radius)
    pts = grid.points
    out = np.empty(q.shape[0], dtype=bool)
    for s in range(0, q.shape[0], _CHUNK):
        blk = q[s : s + _CHUNK]
        d = blk[:, None, :] - pts[None, :, :]
        d2 = (d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1]) + d[..., 2] * d[..., 2]
        out[s : s + _CHUNK] = d2.min(axis=1) <= r2
    return out


def min_squared_distance(a: np.ndarray, b: np.ndarray) -> float:
    pa = np.ascontiguousarray(a, dtype=np.float64)
    pb = np.ascontiguousarray(b, dtype=np.float64)
    if pa.shape[0] == 0 or pb.shape[0] == 0:
        raise ValueError("min_squared_distance on empty set")
    best = np.inf
    for s in range(0, pa.shape[0], _CHUNK):
        blk = pa[s : s + _CHUNK]
        d = blk[:, None, :] - pb[None, :, :]
        d2 = (d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1]) + d[..., 2] * d[..., 2]
        best = min(best, float(d2.min()))
    return best
