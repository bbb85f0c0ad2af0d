"""Time-persistent 3D instances from per-frame semantic masks.

Per seed frame, same-class connected components become FrameInstances whose
member dense points carry them to a shared reference timestep. Components
from different seed frames that overlap there (containment score above a
threshold) are merged with union-find into persistent instances, so an
object keeps one identity across the clip while still being allowed to
enter or leave.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import ndimage

from . import _kernels
from .densification import DensePointCloud
from .errors import EmptyMembership, EmptySet, NoAliveControls, UnknownInstance
from .lifting import ControlPointCloud

DEFAULT_TAU = 0.6
DEFAULT_PRESENCE_FRACTION = 0.2

_FOUR = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class MergeConfig:
    seed_frames: tuple[int, ...]
    t_ref: int
    radius: Optional[float] = None  # None: derive from control spacing
    tau: float = DEFAULT_TAU
    min_component_pixels: int = 1
    connectivity: int = 4
    presence_fraction: float = DEFAULT_PRESENCE_FRACTION

    def __post_init__(self):
        if not self.seed_frames:
            raise ValueError("need at least one seed frame")
        if self.t_ref < 0:
            raise ValueError("t_ref must be >= 0")
        if self.radius is not None and not self.radius > 0:
            raise ValueError("radius must be > 0")
        if not 0 < self.tau <= 1:
            raise ValueError("tau must be in (0, 1]")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")


@dataclass(frozen=True)
class FrameInstance:
    seed_frame: int
    class_id: int
    pixels: np.ndarray  # (P, 2) int64, (u, v)
    member_ids: Optional[np.ndarray] = None  # dense point ids, set by attach_members

    @property
    def num_pixels(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class PersistentInstance:
    instance_id: int
    class_id: int
    member_ids: np.ndarray  # sorted dense point ids
    contributors: tuple[FrameInstance, ...]
    presence: np.ndarray  # (T,) bool


@dataclass(frozen=True)
class InstanceTable:
    instances: tuple[PersistentInstance, ...]
    t_ref: int
    radius: float
    tau: float

    def __len__(self) -> int:
        return len(self.instances)

    def get(self, instance_id: int) -> PersistentInstance:
        for inst in self.instances:
            if inst.instance_id == instance_id:
                return inst
        raise UnknownInstance(f"no instance with id {instance_id}")


def connected_components(mask_frame: np.ndarray, min_pixels: int = 1, connectivity: int = 4):
    """Same-class connected regions, class 0 ignored, ordered by
    (class id, first pixel in row-major order)."""
    structure = _FOUR if connectivity == 4 else _EIGHT
    w = mask_frame.shape[1]
    out = []
    for cid in np.unique(mask_frame):
        cid = int(cid)
        if cid == 0:
            continue
        labeled, n = ndimage.label(mask_frame == cid, structure=structure)
        comps = []
        for li in range(1, n + 1):
            vs, us = np.nonzero(labeled == li)
            if vs.size < min_pixels:
                continue
            flat_min = int((vs * w + us).min())
            comps.append((flat_min, np.stack([us, vs], axis=-1).astype(np.int64)))
        comps.sort(key=lambda c: c[0])
        for _, px in comps:
            out.append(FrameInstance(seed_frame=-1, class_id=cid, pixels=px))
    return out


def components_at(masks: np.ndarray, t: int, min_pixels: int = 1, connectivity: int = 4):
    """connected_components for frame t, with seed_frame stamped."""
    return [
        replace(inst, seed_frame=t)
        for inst in connected_components(masks[t], min_pixels, connectivity)
    ]


def attach_members(instances, dense: DensePointCloud, width: int, height: int):
    """Resolve each instance's pixels to dense point ids at its seed frame."""
    lookup: dict[int, np.ndarray] = {}
    for t in np.unique(dense.t_obs):
        grid = np.full((height, width), -1, dtype=np.int64)
        sel = np.flatnonzero(dense.t_obs == t)
        grid[dense.pixels[sel, 1], dense.pixels[sel, 0]] = sel
        lookup[int(t)] = grid
    out = []
    for inst in instances:
        grid = lookup.get(inst.seed_frame)
        if grid is None:
            members = np.empty(0, dtype=np.int64)
        else:
            ids = grid[inst.pixels[:, 1], inst.pixels[:, 0]]
            members = np.sort(ids[ids >= 0])
        out.append(replace(inst, member_ids=members))
    return out


def lift_to_ref(instance: FrameInstance, dense: DensePointCloud, t_ref: int) -> np.ndarray:
    """Positions of the instance's member dense points at t_ref."""
    if instance.member_ids is None or instance.member_ids.size == 0:
        raise EmptyMembership(
            f"instance (class {instance.class_id}, frame {instance.seed_frame}) has no dense members"
        )
    return dense.positions[instance.member_ids, t_ref, :]


def containment_score(a: np.ndarray, b: np.ndarray, r: float) -> float:
    """Fraction of the smaller set lying within r of the other set."""
    pa = np.asarray(a, dtype=np.float64).reshape(-1, 3)
    pb = np.asarray(b, dtype=np.float64).reshape(-1, 3)
    if pa.shape[0] == 0 or pb.shape[0] == 0:
        raise EmptySet("containment_score needs two nonempty point sets")
    small, other = (pa, pb) if pa.shape[0] <= pb.shape[0] else (pb, pa)
    grid = _kernels.build_grid(other)
    hit = _kernels.within_radius(grid, small, float(r))
    return float(hit.sum()) / float(small.shape[0])


class UnionFind:
    """Path compression + union by size; equal sizes keep the smaller root."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb] or (self.size[ra] == self.size[rb] and rb < ra):
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]

    def groups(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for i in range(len(self.parent)):
            out.setdefault(self.find(i), []).append(i)
        return out


def resolve_radius(controls: ControlPointCloud, t_ref: int) -> float:
    """Default containment radius: twice the median 1-NN spacing of alive
    controls at t_ref."""
    alive = np.flatnonzero(controls.alive)
    if alive.size == 0:
        raise NoAliveControls("cannot derive a radius without alive controls")
    if alive.size < 2:
        return 1.0
    pts = np.ascontiguousarray(controls.positions[alive, t_ref, :])
    grid = _kernels.build_grid(pts)
    _, d2 = _kernels.knn(grid, pts, 2)
    spacing = float(np.median(np.sqrt(d2[:, 1])))
    return 2.0 * spacing if spacing > 0 else 1.0


def merge_instances(frame_instances, dense: DensePointCloud, config: MergeConfig) -> InstanceTable:
    """Union same-class instances from different seed frames that coincide
    at t_ref; build the persistent instance table."""
    if config.radius is None:
        raise ValueError("config.radius must be resolved before merging")
    insts = [i for i in frame_instances if i.member_ids is not None and i.member_ids.size > 0]
    lifted = [lift_to_ref(i, dense, config.t_ref) for i in insts]

    uf = UnionFind(len(insts))
    for i in range(len(insts)):
        for j in range(i + 1, len(insts)):
            if insts[i].seed_frame == insts[j].seed_frame:
                continue
            if insts[i].class_id != insts[j].class_id:
                continue
            score = containment_score(lifted[i], lifted[j], config.radius)
            if score >= config.tau:
                uf.union(i, j)

    t = dense.num_timesteps
    groups = []
    for members in uf.groups().values():
        ids = np.unique(np.concatenate([insts[i].member_ids for i in members]))
        groups.append((int(ids.min()), ids, tuple(insts[i] for i in members)))
    groups.sort(key=lambda g: g[0])

    instances = []
    for iid, (_, ids, contributors) in enumerate(groups):
        instances.append(
            PersistentInstance(
                instance_id=iid,
                class_id=contributors[0].class_id,
                member_ids=ids,
                contributors=contributors,
                presence=np.ones(t, dtype=bool),  # refined by presence_over_time
            )
        )
    return InstanceTable(
        instances=tuple(instances), t_ref=config.t_ref, radius=config.radius, tau=config.tau
    )


def presence_over_time(
    member_ids: np.ndarray,
    dense: DensePointCloud,
    controls: ControlPointCloud,
    fraction: float = DEFAULT_PRESENCE_FRACTION,
) -> np.ndarray:
    """Present at t iff at least `fraction` of the controls underlying the
    members are visible at t."""
    ctrl_ids = np.unique(dense.neighbors[member_ids].ravel())
    vis = controls.visibility[ctrl_ids]  # (C, T)
    return vis.mean(axis=0) >= fraction


def build_instances(
    masks: np.ndarray,
    dense: DensePointCloud,
    controls: ControlPointCloud,
    config: MergeConfig,
) -> InstanceTable:
    """Full semantics pass: components per seed frame, member attachment,
    merging, and presence flags."""
    cfg = config
    if cfg.radius is None:
        cfg = replace(cfg, radius=resolve_radius(controls, cfg.t_ref))
    height, width = masks.shape[1:]
    insts = []
    for t in cfg.seed_frames:
        insts.extend(components_at(masks, t, cfg.min_component_pixels, cfg.connectivity))
    insts = attach_members(insts, dense, width, height)
    table = merge_instances(insts, dense, cfg)
    refined = tuple(
        replace(
            inst,
            presence=presence_over_time(inst.member_ids, dense, controls, cfg.presence_fraction),
        )
        for inst in table.instances
    )
    return replace(table, instances=refined)
