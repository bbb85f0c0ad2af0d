"""Lift 2D pixel tracks into a 4D control point cloud.

Each track point is back-projected through the depth map at every timestep.
Three robustness mechanisms, each independently toggleable: depth maintenance
(occluded points keep the depth from when they were last seen), jump filtering
(points whose camera-space depth jumps between background and foreground are
dropped), and depth-gradient filtering (depth samples on strong depth edges
are treated as unreliable).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateStatisticsWarning, NonPositiveDepth, TimestepMismatch
from .scene_io import CameraModel, SceneBundle

MIN_DEPTH = 1e-6
MIN_JUMP_PAIRS = 10
JUMP_FLOOR_FRACTION = 0.05


@dataclass(frozen=True)
class LiftConfig:
    jump_threshold_factor: float = 5.0
    gradient_percentile: float = 95.0
    enable_jump_filter: bool = True
    enable_depth_maintenance: bool = True
    enable_gradient_filter: bool = True

    def __post_init__(self):
        if not self.jump_threshold_factor > 0:
            raise ValueError("jump_threshold_factor must be > 0")
        if not 0 < self.gradient_percentile < 100:
            raise ValueError("gradient_percentile must be in (0, 100)")


@dataclass(frozen=True)
class ControlPointCloud:
    """Sparse 4D point cloud: N tracked points over T timesteps.

    Removed points stay in the arrays with alive=False so ablations can
    inspect them; every downstream query must filter on alive.
    """

    positions: np.ndarray  # (N, T, 3) float64, world coordinates
    visibility: np.ndarray  # (N, T) bool, from the tracker
    alive: np.ndarray  # (N,) bool
    init_timestep: int
    pixels: np.ndarray  # (N, T, 2) float64, source pixel coords
    cam_depths: np.ndarray  # (N, T) float64, camera-frame z used for lifting
    init_timesteps: np.ndarray  # (N,) int64, per-point seed frame

    @property
    def num_points(self) -> int:
        return self.positions.shape[0]

    @property
    def num_timesteps(self) -> int:
        return self.positions.shape[1]


def unproject(pixel, z: float, camera: CameraModel, t: int) -> np.ndarray:
    """Back-project one pixel at depth z into world coordinates."""
    if not z > 0:
        raise NonPositiveDepth(f"depth must be > 0, got {z}")
    u, v = float(pixel[0]), float(pixel[1])
    x = (u - camera.cx) * z / camera.fx
    y = (v - camera.cy) * z / camera.fy
    cam = np.array([x, y, z], dtype=np.float64)
    return camera.rotations[t] @ cam + camera.translations[t]


def project(points: np.ndarray, camera: CameraModel, t: int) -> np.ndarray:
    """World points -> (u, v, z_cam). Callers must check z_cam > 0."""
    p = np.asarray(points, dtype=np.float64)
    cam = (p - camera.translations[t]) @ camera.rotations[t]
    z = cam[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = camera.fx * cam[..., 0] / z + camera.cx
        v = camera.fy * cam[..., 1] / z + camera.cy
    return np.stack([u, v, z], axis=-1)


def sample_bilinear(frame: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Bilinear sample of an (H, W) frame at float pixel coords, edge-clamped."""
    h, w = frame.shape
    uc = np.clip(np.asarray(u, dtype=np.float64), 0.0, w - 1.0)
    vc = np.clip(np.asarray(v, dtype=np.float64), 0.0, h - 1.0)
    x0 = np.minimum(np.floor(uc), w - 2 if w > 1 else 0).astype(np.int64)
    y0 = np.minimum(np.floor(vc), h - 2 if h > 1 else 0).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fu = uc - x0
    fv = vc - y0
    f = frame.astype(np.float64, copy=False)
    top = (1.0 - fu) * f[y0, x0] + fu * f[y0, x1]
    bot = (1.0 - fu) * f[y1, x0] + fu * f[y1, x1]
    return (1.0 - fv) * top + fv * bot


def depth_gradient_mask(depth_frame: np.ndarray, percentile: float) -> np.ndarray:
    """True where depth is locally smooth enough to trust.

    Per-axis gradient is the larger magnitude of the two one-sided
    differences, so a single-pixel spike flags itself as well as its
    neighbors; borders fall back to the one existing side.
    """
    d = np.asarray(depth_frame, dtype=np.float64)
    gx = np.zeros_like(d)
    gy = np.zeros_like(d)
    if d.shape[1] > 1:
        fwd = np.abs(np.diff(d, axis=1))
        gx[:, :-1] = fwd
        gx[:, 1:] = np.maximum(gx[:, 1:], fwd)
    if d.shape[0] > 1:
        fwd = np.abs(np.diff(d, axis=0))
        gy[:-1, :] = fwd
        gy[1:, :] = np.maximum(gy[1:, :], fwd)
    mag = np.hypot(gx, gy)
    return mag <= np.percentile(mag, percentile)


def _fill_outward(values: np.ndarray, trusted: np.ndarray, init_timesteps: np.ndarray):
    """Replace untrusted entries with the nearest trusted value, scanning
    forward for t >= init and backward for t < init, with cross fallback.

    Returns (filled, has_any) where has_any marks rows with at least one
    trusted entry; rows without any keep their input values.
    """
    n, t = values.shape
    ts = np.arange(t)
    fwd = np.maximum.accumulate(np.where(trusted, ts[None, :], -1), axis=1)
    rev = np.where(trusted, ts[None, :], t)[:, ::-1]
    bwd = np.minimum.accumulate(rev, axis=1)[:, ::-1]

    after_init = ts[None, :] >= init_timesteps[:, None]
    primary = np.where(after_init, fwd, bwd)
    fallback = np.where(after_init, bwd, fwd)
    src = np.where((primary >= 0) & (primary < t), primary, fallback)
    has_any = trusted.any(axis=1)
    src = np.clip(src, 0, t - 1)
    filled = np.take_along_axis(values, src, axis=1)
    return np.where(has_any[:, None], filled, values), has_any


def _unproject_grid(pixels: np.ndarray, z: np.ndarray, camera: CameraModel) -> np.ndarray:
    """Vectorized unprojection of (N, T, 2) pixels at (N, T) depths."""
    x = (pixels[..., 0] - camera.cx) * z / camera.fx
    y = (pixels[..., 1] - camera.cy) * z / camera.fy
    cam = np.stack([x, y, z], axis=-1)  # (N, T, 3)
    rot = camera.rotations  # (T, 3, 3)
    world = np.einsum("tij,ntj->nti", rot, cam) + camera.translations[None, :, :]
    return world


def lift_track_set(
    bundle: SceneBundle,
    tracks: np.ndarray,
    visibility: np.ndarray,
    init_timestep: int,
    config: LiftConfig,
) -> ControlPointCloud:
    """Lift one tracker run; applies maintenance then jump filtering."""
    depths = bundle.depths
    camera = bundle.camera
    n, t = visibility.shape
    pixels = np.ascontiguousarray(tracks, dtype=np.float64)
    vis = visibility.astype(bool)

    raw_z = np.empty((n, t), dtype=np.float64)
    trusted = vis.copy()
    for ti in range(t):
        raw_z[:, ti] = sample_bilinear(depths[ti], pixels[:, ti, 0], pixels[:, ti, 1])
        if config.enable_gradient_filter:
            ok = depth_gradient_mask(depths[ti], config.gradient_percentile)
            ui = np.clip(np.rint(pixels[:, ti, 0]).astype(np.int64), 0, ok.shape[1] - 1)
            vi = np.clip(np.rint(pixels[:, ti, 1]).astype(np.int64), 0, ok.shape[0] - 1)
            trusted[:, ti] &= ok[vi, ui]

    bad = trusted & (raw_z <= 0)
    if bad.any():
        ni, ti = np.unravel_index(int(np.argmax(bad)), bad.shape)
        raise NonPositiveDepth(
            f"visible sample of point {ni} at t={ti} has depth {raw_z[ni, ti]}"
        )

    init_timesteps = np.full(n, init_timestep, dtype=np.int64)
    if config.enable_depth_maintenance:
        z_used, has_any = _fill_outward(raw_z, trusted, init_timesteps)
        z_used = np.maximum(z_used, MIN_DEPTH)
        alive = has_any
    else:
        z_used = np.maximum(raw_z, MIN_DEPTH)
        alive = vis.any(axis=1)

    positions = _unproject_grid(pixels, z_used, camera)
    cloud = ControlPointCloud(
        positions=positions,
        visibility=vis,
        alive=alive,
        init_timestep=init_timestep,
        pixels=pixels,
        cam_depths=z_used,
        init_timesteps=init_timesteps,
    )
    if config.enable_jump_filter:
        cloud = filter_jumps(cloud, config.jump_threshold_factor)
    return cloud


def lift_tracks(bundle: SceneBundle, config: LiftConfig) -> ControlPointCloud:
    """Lift the bundle's primary track set."""
    return lift_track_set(
        bundle,
        bundle.tracks,
        bundle.visibility,
        bundle.manifest.track_init_timestep,
        config,
    )


def maintain_depth(
    cloud: ControlPointCloud, depths: np.ndarray, camera: CameraModel
) -> ControlPointCloud:
    """Rewrite invisible timesteps to reuse the last observed depth.

    Positions at visible timesteps are preserved bit for bit; only the
    invisible slots are re-unprojected at the filled depth.
    """
    vis = cloud.visibility
    n, t = vis.shape
    raw = np.empty((n, t), dtype=np.float64)
    for ti in range(t):
        raw[:, ti] = sample_bilinear(depths[ti], cloud.pixels[:, ti, 0], cloud.pixels[:, ti, 1])
    z_used, has_any = _fill_outward(raw, vis, cloud.init_timesteps)
    z_used = np.where(vis, cloud.cam_depths, np.maximum(z_used, MIN_DEPTH))
    positions = _unproject_grid(cloud.pixels, z_used, camera)
    positions = np.where(vis[:, :, None], cloud.positions, positions)
    return replace(
        cloud,
        positions=positions,
        cam_depths=z_used,
        alive=cloud.alive & has_any,
    )


def filter_jumps(cloud: ControlPointCloud, jump_threshold_factor: float = 5.0) -> ControlPointCloud:
    """Drop points whose camera-space depth changes abruptly between steps.

    Threshold is kappa times the median per-step |dz| over visible step
    pairs of alive points, floored at 5% of the observed depth range.
    """
    vis = cloud.visibility
    z = cloud.cam_depths
    pair_vis = vis[:, :-1] & vis[:, 1:] & cloud.alive[:, None]
    deltas = np.abs(z[:, 1:] - z[:, :-1])
    sample = deltas[pair_vis]
    if sample.size < MIN_JUMP_PAIRS:
        warnings.warn(
            f"only {sample.size} visible step pairs, jump filter skipped",
            DegenerateStatisticsWarning,
        )
        return cloud
    seen = z[vis & cloud.alive[:, None]]
    depth_range = float(seen.max() - seen.min()) if seen.size else 0.0
    theta = max(
        jump_threshold_factor * float(np.median(sample)),
        JUMP_FLOOR_FRACTION * depth_range,
    )
    jumped = (pair_vis & (deltas > theta)).any(axis=1)
    return replace(cloud, alive=cloud.alive & ~jumped)


def merge_track_sets(clouds) -> ControlPointCloud:
    """Concatenate clouds from multiple tracker seeds into one."""
    clouds = list(clouds)
    if not clouds:
        raise ValueError("need at least one cloud")
    t = clouds[0].num_timesteps
    for c in clouds[1:]:
        if c.num_timesteps != t:
            raise TimestepMismatch(f"clouds disagree on T: {t} vs {c.num_timesteps}")
    return ControlPointCloud(
        positions=np.concatenate([c.positions for c in clouds], axis=0),
        visibility=np.concatenate([c.visibility for c in clouds], axis=0),
        alive=np.concatenate([c.alive for c in clouds], axis=0),
        init_timestep=clouds[0].init_timestep,
        pixels=np.concatenate([c.pixels for c in clouds], axis=0),
        cam_depths=np.concatenate([c.cam_depths for c in clouds], axis=0),
        init_timesteps=np.concatenate([c.init_timesteps for c in clouds], axis=0),
    )
