"""Spatiotemporal query functions over a built Scene4D.

These are the agent-facing tools. All of them are pure reads of an
immutable scene. Queries at timesteps where an instance is absent still
succeed, but the result is flagged stale: absent points ride on maintained
depth and should be treated as context, not exact geometry.

World frame: +x right, +y down, +z away from the camera (the first camera
frame when extrinsics are identity).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import _kernels
from .densification import DensePointCloud
from .errors import BadInterval, FrameUnavailable, OutOfRange, UnknownInstance
from .lifting import ControlPointCloud
from .scene_io import CameraModel, SceneManifest
from .semantics import InstanceTable, PersistentInstance

DIRECTION_DEADZONE = 0.25
ZERO_MOTION = 1e-9


@dataclass(frozen=True)
class Scene4D:
    manifest: SceneManifest
    camera: CameraModel
    controls: ControlPointCloud
    dense: DensePointCloud
    instances: InstanceTable

    def __post_init__(self):
        t = self.manifest.num_timesteps
        if not (
            self.controls.num_timesteps == t
            and self.dense.num_timesteps == t
            and len(self.camera) == t
        ):
            raise ValueError("scene components disagree on the number of timesteps")

    @property
    def num_timesteps(self) -> int:
        return self.manifest.num_timesteps


@dataclass(frozen=True)
class InstanceSummary:
    instance_id: int
    class_id: int
    class_name: str
    num_points: int
    centroid: np.ndarray  # (3,) at t_ref
    extent: np.ndarray  # (3,) axis-aligned size at t_ref
    first_present: Optional[int]
    last_present: Optional[int]


def _instance(scene: Scene4D, instance_id) -> PersistentInstance:
    if not isinstance(instance_id, (int, np.integer)):
        raise UnknownInstance(f"instance id must be an integer, got {instance_id!r}")
    return scene.instances.get(int(instance_id))


def _check_t(scene: Scene4D, t, name: str = "t") -> int:
    if not isinstance(t, (int, np.integer)):
        raise OutOfRange(f"{name} must be an integer timestep, got {t!r}")
    t = int(t)
    if not 0 <= t < scene.num_timesteps:
        raise OutOfRange(f"{name}={t} outside [0, {scene.num_timesteps})")
    return t


def _points_at(scene: Scene4D, inst: PersistentInstance, t: int) -> np.ndarray:
    return scene.dense.positions[inst.member_ids, t, :]


def centroid_at(scene: Scene4D, instance_id: int, t: int) -> np.ndarray:
    inst = _instance(scene, instance_id)
    return _points_at(scene, inst, _check_t(scene, t)).mean(axis=0)


def scene_summary(scene: Scene4D) -> list[InstanceSummary]:
    """One geometric summary per persistent instance, at t_ref."""
    t_ref = scene.instances.t_ref
    out = []
    for inst in scene.instances.instances:
        pts = _points_at(scene, inst, t_ref)
        present = np.flatnonzero(inst.presence)
        out.append(
            InstanceSummary(
                instance_id=inst.instance_id,
                class_id=inst.class_id,
                class_name=scene.manifest.class_names.get(inst.class_id, f"class_{inst.class_id}"),
                num_points=int(inst.member_ids.size),
                centroid=pts.mean(axis=0),
                extent=pts.max(axis=0) - pts.min(axis=0),
                first_present=int(present[0]) if present.size else None,
                last_present=int(present[-1]) if present.size else None,
            )
        )
    return out


def _stale(a: PersistentInstance, b: Optional[PersistentInstance], t: int) -> bool:
    s = not bool(a.presence[t])
    if b is not None:
        s = s or not bool(b.presence[t])
    return s


def min_distance(scene: Scene4D, a: int, b: int, t=None):
    """Minimum member-pair distance. t=None gives the full per-t series.

    Returns (meters, stale) for scalar t, or (series, stale_series) arrays.
    """
    ia, ib = _instance(scene, a), _instance(scene, b)
    if t is not None:
        t = _check_t(scene, t)
        d2 = _kernels.min_squared_distance(_points_at(scene, ia, t), _points_at(scene, ib, t))
        return float(np.sqrt(d2)), _stale(ia, ib, t)
    ts = range(scene.num_timesteps)
    meters = np.array(
        [
            np.sqrt(_kernels.min_squared_distance(_points_at(scene, ia, ti), _points_at(scene, ib, ti)))
            for ti in ts
        ]
    )
    stale = np.array([_stale(ia, ib, ti) for ti in ts], dtype=bool)
    return meters, stale


def overlap_score(scene: Scene4D, a: int, b: int, t: int):
    """Symmetric overlap: mean of the two directed coverage fractions at the
    scene's containment radius. Returns (score, stale)."""
    ia, ib = _instance(scene, a), _instance(scene, b)
    t = _check_t(scene, t)
    r = scene.instances.radius
    pa, pb = _points_at(scene, ia, t), _points_at(scene, ib, t)
    cov_ab = float(_kernels.within_radius(_kernels.build_grid(pb), pa, r).mean())
    cov_ba = float(_kernels.within_radius(_kernels.build_grid(pa), pb, r).mean())
    return 0.5 * (cov_ab + cov_ba), _stale(ia, ib, t)


def overlap_position(scene: Scene4D, a: int, b: int, t: int):
    """Centroid of the points of either instance lying within the containment
    radius of the other; None when there is no overlap. Returns (point, stale)."""
    ia, ib = _instance(scene, a), _instance(scene, b)
    t = _check_t(scene, t)
    r = scene.instances.radius
    pa, pb = _points_at(scene, ia, t), _points_at(scene, ib, t)
    in_a = _kernels.within_radius(_kernels.build_grid(pb), pa, r)
    in_b = _kernels.within_radius(_kernels.build_grid(pa), pb, r)
    if not (in_a.any() or in_b.any()):
        return None, _stale(ia, ib, t)
    pts = np.concatenate([pa[in_a], pb[in_b]], axis=0)
    return pts.mean(axis=0), _stale(ia, ib, t)


def relative_motion(scene: Scene4D, a: int, b: int, t0: int, t1: int):
    """Change of the centroid offset (a relative to b) from t0 to t1.

    Common motion cancels: co-moving instances yield (0,0,0).
    Returns (vector, stale)."""
    ia, ib = _instance(scene, a), _instance(scene, b)
    t0 = _check_t(scene, t0, "t0")
    t1 = _check_t(scene, t1, "t1")
    if not t0 < t1:
        raise BadInterval(f"need t0 < t1, got ({t0}, {t1})")
    ca0 = _points_at(scene, ia, t0).mean(axis=0)
    ca1 = _points_at(scene, ia, t1).mean(axis=0)
    cb0 = _points_at(scene, ib, t0).mean(axis=0)
    cb1 = _points_at(scene, ib, t1).mean(axis=0)
    vec = (ca1 - cb1) - (ca0 - cb0)
    stale = _stale(ia, ib, t0) or _stale(ia, ib, t1)
    return vec, stale


def trajectory(scene: Scene4D, a: int, stride: int = 1):
    """Centroid per sampled timestep: list of (t, centroid, present)."""
    inst = _instance(scene, a)
    if stride < 1:
        raise OutOfRange(f"stride must be >= 1, got {stride}")
    pts = scene.dense.positions[inst.member_ids]  # (P, T, 3)
    out = []
    for t in range(0, scene.num_timesteps, stride):
        out.append((t, pts[:, t, :].mean(axis=0), bool(inst.presence[t])))
    return out


def dominant_direction(scene: Scene4D, a: int, t0: int, t1: int, deadzone: float = DIRECTION_DEADZONE):
    """Discretized centroid motion: per axis -1/0/+1, small components (below
    deadzone x the largest component) snapped to 0. Returns (triple, stale)."""
    inst = _instance(scene, a)
    t0 = _check_t(scene, t0, "t0")
    t1 = _check_t(scene, t1, "t1")
    if not t0 < t1:
        raise BadInterval(f"need t0 < t1, got ({t0}, {t1})")
    d = _points_at(scene, inst, t1).mean(axis=0) - _points_at(scene, inst, t0).mean(axis=0)
    peak = float(np.abs(d).max())
    if peak < ZERO_MOTION:
        triple = (0, 0, 0)
    else:
        triple = tuple(int(np.sign(di)) if abs(di) >= deadzone * peak else 0 for di in d)
    stale = not (bool(inst.presence[t0]) and bool(inst.presence[t1]))
    return triple, stale


def fetch_frame(scene: Scene4D, t: int) -> Path:
    """Path of the source-video frame image for timestep t."""
    t = _check_t(scene, t)
    m = scene.manifest
    if m.frames_dir is None:
        raise FrameUnavailable("scene has no frame image directory")
    path = Path(m.frames_dir) / m.frame_pattern.format(t=t * m.frame_stride)
    if not path.is_file():
        raise FrameUnavailable(f"frame image not found: {path}")
    return path
