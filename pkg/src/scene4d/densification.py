"""Densify the control cloud: every retained pixel becomes a 4D trajectory.

Pixels on a stride grid are unprojected at their observation timestep,
assigned to their K nearest alive control points in 3D, and advected over
time by the IDW-weighted displacement field of those controls. The pixel's
own unprojection anchors the trajectory, so geometry observed at t_obs is
preserved exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import NoAliveControls
from .lifting import ControlPointCloud
from .scene_io import SceneBundle

EXACT_HIT = 1e-9


@dataclass(frozen=True)
class DensifyConfig:
    k: int = 8
    pixel_stride: int = 4
    idw_power: float = 2.0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.pixel_stride < 1:
            raise ValueError("pixel_stride must be >= 1")
        if not self.idw_power > 0:
            raise ValueError("idw_power must be > 0")


@dataclass(frozen=True)
class PixelAssignments:
    t_obs: np.ndarray  # (M,) int64
    pixels: np.ndarray  # (M, 2) int64, (u, v)
    anchors: np.ndarray  # (M, 3) float64, own unprojection at t_obs
    neighbors: np.ndarray  # (M, K) int64 control indices
    weights: np.ndarray  # (M, K) float64, each row sums to 1

    @property
    def num_points(self) -> int:
        return self.t_obs.shape[0]


@dataclass(frozen=True)
class DensePointCloud:
    t_obs: np.ndarray  # (M,) int64
    pixels: np.ndarray  # (M, 2) int64, (u, v)
    positions: np.ndarray  # (M, T, 3) float64 world
    neighbors: np.ndarray  # (M, K) int64
    weights: np.ndarray  # (M, K) float64
    class_ids: np.ndarray  # (M,) int64, 0 = unlabeled

    @property
    def num_points(self) -> int:
        return self.t_obs.shape[0]

    @property
    def num_timesteps(self) -> int:
        return self.positions.shape[1]


def idw_weights(distances: np.ndarray, power: float) -> np.ndarray:
    """Inverse-distance weights per row; an exact hit takes all the mass."""
    d = np.asarray(distances, dtype=np.float64)
    w = np.empty_like(d)
    exact = d[:, 0] < EXACT_HIT
    if exact.any():
        w[exact] = 0.0
        w[exact, 0] = 1.0
    rest = ~exact
    if rest.any():
        inv = 1.0 / np.power(d[rest], power)
        w[rest] = inv / inv.sum(axis=1, keepdims=True)
    return w


def assign_pixels(
    bundle: SceneBundle,
    controls: ControlPointCloud,
    gradient_mask: np.ndarray | None,
    config: DensifyConfig,
    t_obs: int | None = None,
) -> PixelAssignments:
    """Pick stride-grid pixels at t_obs and bind each to K nearby controls."""
    if t_obs is None:
        t_obs = controls.init_timestep
    m = bundle.manifest
    depth = bundle.depths[t_obs]

    vs, us = np.meshgrid(
        np.arange(0, m.height, config.pixel_stride),
        np.arange(0, m.width, config.pixel_stride),
        indexing="ij",
    )
    us = us.ravel()
    vs = vs.ravel()
    keep = depth[vs, us] > 0
    if gradient_mask is not None:
        keep &= gradient_mask[vs, us]
    us, vs = us[keep], vs[keep]

    alive_ids = np.flatnonzero(controls.alive)
    if alive_ids.size == 0:
        raise NoAliveControls("no alive control points to assign against")
    k = min(config.k, alive_ids.size)

    z = depth[vs, us].astype(np.float64)
    cam = bundle.camera
    x = (us - cam.cx) * z / cam.fx
    y = (vs - cam.cy) * z / cam.fy
    anchors = np.stack([x, y, z], axis=-1) @ cam.rotations[t_obs].T + cam.translations[t_obs]

    ctrl = np.ascontiguousarray(controls.positions[alive_ids, t_obs])
    grid = _kernels.build_grid(ctrl)
    idx, d2 = _kernels.knn(grid, anchors, k)
    weights = idw_weights(np.sqrt(d2), config.idw_power)

    return PixelAssignments(
        t_obs=np.full(us.shape[0], t_obs, dtype=np.int64),
        pixels=np.stack([us, vs], axis=-1).astype(np.int64),
        anchors=anchors,
        neighbors=alive_ids[idx],
        weights=weights,
    )


def densify(assignments: PixelAssignments, controls: ControlPointCloud) -> DensePointCloud:
    """Advect each anchored pixel by its neighbors' weighted displacements."""
    m = assignments.num_points
    t = controls.num_timesteps
    nbr = assignments.neighbors  # (M, K)
    w = assignments.weights
    # neighbor positions at each point's own observation timestep
    at_obs = controls.positions[nbr, assignments.t_obs[:, None], :]  # (M, K, 3)
    positions = np.empty((m, t, 3), dtype=np.float64)
    for ti in range(t):
        disp = controls.positions[nbr, ti, :] - at_obs
        positions[:, ti, :] = assignments.anchors + np.einsum("mk,mkc->mc", w, disp)
    return DensePointCloud(
        t_obs=assignments.t_obs,
        pixels=assignments.pixels,
        positions=positions,
        neighbors=nbr,
        weights=w,
        class_ids=np.zeros(m, dtype=np.int64),
    )


def attach_semantics(dense: DensePointCloud, masks: np.ndarray) -> DensePointCloud:
    """Stamp each dense point with the mask class at its source pixel."""
    u = dense.pixels[:, 0]
    v = dense.pixels[:, 1]
    cls = masks[dense.t_obs, v, u].astype(np.int64)
    return replace(dense, class_ids=cls)


def concat_dense(clouds) -> DensePointCloud:
    """Concatenate dense clouds (e.g. one per seed frame); ids stay positional."""
    clouds = list(clouds)
    if not clouds:
        raise ValueError("need at least one dense cloud")
    if len(clouds) == 1:
        return clouds[0]
    k = max(c.neighbors.shape[1] for c in clouds)

    def pad(c: DensePointCloud):
        if c.neighbors.shape[1] == k:
            return c.neighbors, c.weights
        # pad narrow assignments by repeating the last neighbor with weight 0
        short = k - c.neighbors.shape[1]
        nbr = np.concatenate([c.neighbors, np.repeat(c.neighbors[:, -1:], short, axis=1)], axis=1)
        wts = np.concatenate([c.weights, np.zeros((c.weights.shape[0], short))], axis=1)
        return nbr, wts

    padded = [pad(c) for c in clouds]
    return DensePointCloud(
        t_obs=np.concatenate([c.t_obs for c in clouds]),
        pixels=np.concatenate([c.pixels for c in clouds]),
        positions=np.concatenate([c.positions for c in clouds]),
        neighbors=np.concatenate([p[0] for p in padded]),
        weights=np.concatenate([p[1] for p in padded]),
        class_ids=np.concatenate([c.class_ids for c in clouds]),
    )


_PALETTE = np.array(
    [
        [190, 190, 190],
        [230, 25, 75],
        [60, 180, 75],
        [255, 225, 25],
        [0, 130, 200],
        [245, 130, 48],
        [145, 30, 180],
        [70, 240, 240],
        [240, 50, 230],
        [210, 245, 60],
        [250, 190, 190],
        [0, 128, 128],
    ],
    dtype=np.uint8,
)


def class_color(class_id: int) -> tuple[int, int, int]:
    row = _PALETTE[class_id % len(_PALETTE)]
    return int(row[0]), int(row[1]), int(row[2])


def export_ply(dense: DensePointCloud, t: int, path, binary: bool = False) -> Path:
    """Write one timestep of the dense cloud as a PLY file (xyz + rgb)."""
    path = Path(path)
    pts = dense.positions[:, t, :]
    rgb = _PALETTE[dense.class_ids % len(_PALETTE)]
    header = [
        "ply",
        "format binary_little_endian 1.0" if binary else "format ascii 1.0",
        f"element vertex {pts.shape[0]}",
        "property float x",
        "property float y",
        "property float z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        "end_header",
    ]
    if binary:
        rec = np.empty(
            pts.shape[0],
            dtype=[("x", "<f4"), ("y", "<f4"), ("z", "<f4"),
                   ("r", "u1"), ("g", "u1"), ("b", "u1")],
        )
        rec["x"], rec["y"], rec["z"] = pts[:, 0], pts[:, 1], pts[:, 2]
        rec["r"], rec["g"], rec["b"] = rgb[:, 0], rgb[:, 1], rgb[:, 2]
        with open(path, "wb") as fh:
            fh.write(("\n".join(header) + "\n").encode("ascii"))
            rec.tofile(fh)
    else:
        with open(path, "w") as fh:
            fh.write("\n".join(header) + "\n")
            for p, c in zip(pts, rgb):
                fh.write(f"{p[0]:.6f} {p[1]:.6f} {p[2]:.6f} {c[0]} {c[1]} {c[2]}\n")
    return path
