"""Synthetic scene generation with closed-form ground truth.

Scenes are built from fronto-parallel rectangular plates moving over a flat
background plane, rendered through the same pinhole model the lifting stage
inverts. Everything is analytic: depth maps and masks come from a z-buffer
over rectangles, track visibility from the same z-buffer, and 3D
trajectories from the piecewise-linear plate paths. That makes these
fixtures usable as oracles: the reconstruction can be checked against
closed-form positions instead of against itself.

Units: plate geometry is specified in meters; presets derive sizes from
pixel framing via size_px * z / focal. Pixel centers sit at integer
coordinates, so a plate spanning u in [34.5, 79.5] covers pixels 35..79.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import RecipeInvalid, UnknownInstance
from .scene_io import (
    CameraModel,
    SceneBundle,
    SceneManifest,
    TrackSet,
    identity_poses,
    write_bundle,
)

# padding (px) around a plate's swept rectangle when placing background
# tracks, so an "occlusion-free" recipe really is occlusion free
SWEEP_PAD_PX = 3.0
BG_INSET_PX = 2


@dataclass(frozen=True)
class PlateSpec:
    """Rigid fronto-parallel rectangle following a piecewise-linear path."""

    name: str
    class_id: int
    size: tuple[float, float]  # (sx, sy) meters
    waypoints: tuple[tuple[int, tuple[float, float, float]], ...]
    track_step: float = 0.08  # meters between track grid points
    track_inset: float = 0.034  # margin between grid and plate edge

    def center(self, t: float) -> np.ndarray:
        """Piecewise-linear center; clamps outside the waypoint span."""
        ts = [w[0] for w in self.waypoints]
        cs = np.asarray([w[1] for w in self.waypoints], dtype=np.float64)
        if t <= ts[0]:
            return cs[0].copy()
        for i in range(1, len(ts)):
            if t <= ts[i]:
                a = (t - ts[i - 1]) / (ts[i] - ts[i - 1])
                return (1.0 - a) * cs[i - 1] + a * cs[i]
        return cs[-1].copy()


@dataclass(frozen=True)
class JumperSpec:
    """A deliberately broken track alternating between two fixed pixels."""

    pixel_a: tuple[int, int]  # (u, v), used at even timesteps
    pixel_b: tuple[int, int]


@dataclass(frozen=True)
class SceneRecipe:
    scene_id: str
    width: int = 160
    height: int = 128
    num_timesteps: int = 20
    focal: float = 120.0
    bg_z: float = 2.0
    bg_class: int = 1
    bg_track_step_px: int = 16
    bg_region: tuple[int, int, int, int] | None = None  # (u0, v0, u1, v1), None = full
    plates: tuple[PlateSpec, ...] = ()
    jumper: JumperSpec | None = None
    init_timestep: int | None = None  # None -> T // 2
    contact_pair: tuple[str, str] | None = None
    avoid_sweeps: bool = True  # keep background tracks clear of plate paths
    class_names: dict[int, str] = field(default_factory=dict)
    multi_seed: bool = False
    emit_frames: bool = False
    frame_stride: int = 4
    fps: float = 25.0

    @property
    def cx(self) -> float:
        return (self.width - 1) / 2.0

    @property
    def cy(self) -> float:
        return (self.height - 1) / 2.0

    def region(self) -> tuple[int, int, int, int]:
        return self.bg_region if self.bg_region is not None else (0, 0, self.width, self.height)


def _rect_px(recipe: SceneRecipe, plate: PlateSpec, t: float):
    """Projected (u0, v0, u1, v1) bounds of the plate at time t."""
    c = plate.center(t)
    sx, sy = plate.size
    z = c[2]
    u0 = recipe.cx + recipe.focal * (c[0] - sx / 2) / z
    u1 = recipe.cx + recipe.focal * (c[0] + sx / 2) / z
    v0 = recipe.cy + recipe.focal * (c[1] - sy / 2) / z
    v1 = recipe.cy + recipe.focal * (c[1] + sy / 2) / z
    return u0, v0, u1, v1


def validate_recipe(recipe: SceneRecipe) -> None:
    problems: list[str] = []
    w, h, T = recipe.width, recipe.height, recipe.num_timesteps
    if w < 32 or h < 32:
        problems.append(f"image {w}x{h} too small, need at least 32x32")
    if T < 2:
        problems.append("num_timesteps must be >= 2")
    if recipe.focal <= 0:
        problems.append("focal must be positive")
    if recipe.bg_z <= 0:
        problems.append("bg_z must be positive")
    if recipe.frame_stride < 1 or recipe.fps <= 0:
        problems.append("bad frame_stride or fps")
    u0, v0, u1, v1 = recipe.region()
    if not (0 <= u0 < u1 <= w and 0 <= v0 < v1 <= h):
        problems.append(f"bg_region {recipe.region()} outside {w}x{h} image")
    if recipe.init_timestep is not None and not 0 <= recipe.init_timestep < T:
        problems.append(f"init_timestep {recipe.init_timestep} outside [0, {T})")

    names = set()
    for p in recipe.plates:
        if p.name in names:
            problems.append(f"duplicate plate name {p.name!r}")
        names.add(p.name)
        if p.size[0] <= 0 or p.size[1] <= 0 or p.track_step <= 0 or p.track_inset < 0:
            problems.append(f"plate {p.name!r} has non-positive geometry")
            continue
        times = [wp[0] for wp in p.waypoints]
        if not times or times != sorted(set(times)):
            problems.append(f"plate {p.name!r} waypoint times must be strictly increasing")
        if any(not 0 <= wt < T for wt in times):
            problems.append(f"plate {p.name!r} waypoint times outside [0, {T})")
        for t in range(T):
            if p.center(t)[2] <= 0:
                problems.append(f"plate {p.name!r} behind camera at t={t}")
                break
            ru0, rv0, ru1, rv1 = _rect_px(recipe, p, t)
            if ru0 < 1 or rv0 < 1 or ru1 > w - 2 or rv1 > h - 2:
                problems.append(f"plate {p.name!r} leaves the image at t={t}")
                break
    # same-depth plates may touch but not interpenetrate
    for i, a in enumerate(recipe.plates):
        for b in recipe.plates[i + 1 :]:
            for t in range(T):
                ca, cb = a.center(t), b.center(t)
                if abs(ca[2] - cb[2]) > 1e-9:
                    continue
                dx = abs(ca[0] - cb[0]) - (a.size[0] + b.size[0]) / 2
                dy = abs(ca[1] - cb[1]) - (a.size[1] + b.size[1]) / 2
                if dx < -1e-9 and dy < -1e-9:
                    problems.append(
                        f"plates {a.name!r} and {b.name!r} overlap at equal depth, t={t}"
                    )
                    break
    if recipe.jumper is not None:
        for u, v in (recipe.jumper.pixel_a, recipe.jumper.pixel_b):
            if not (0 <= u < w and 0 <= v < h):
                problems.append(f"jumper pixel ({u}, {v}) outside image")
    if recipe.contact_pair is not None:
        a, b = recipe.contact_pair
        if a not in names or b not in names:
            problems.append(f"contact_pair {recipe.contact_pair} names unknown plates")
    if problems:
        raise RecipeInvalid("; ".join(problems))


# ---------------------------------------------------------------------------
# rendering


def _render(recipe: SceneRecipe):
    """Z-buffer render. Returns (depths f32 (T,H,W), ids i16 (T,H,W)).

    ids: 0 = void, 1 = background plane, 2 + k = recipe.plates[k].
    """
    w, h, T = recipe.width, recipe.height, recipe.num_timesteps
    depths = np.zeros((T, h, w), dtype=np.float32)
    ids = np.zeros((T, h, w), dtype=np.int16)
    uu = np.arange(w, dtype=np.float64)
    vv = np.arange(h, dtype=np.float64)
    u0, v0, u1, v1 = recipe.region()
    for t in range(T):
        depths[t, v0:v1, u0:u1] = recipe.bg_z
        ids[t, v0:v1, u0:u1] = 1
        order = sorted(range(len(recipe.plates)), key=lambda k: -recipe.plates[k].center(t)[2])
        for k in order:
            p = recipe.plates[k]
            ru0, rv0, ru1, rv1 = _rect_px(recipe, p, t)
            cover = ((uu >= ru0) & (uu <= ru1))[None, :] & ((vv >= rv0) & (vv <= rv1))[:, None]
            z = np.float32(p.center(t)[2])
            cur = depths[t]
            win = cover & ((cur <= 0) | (z < cur))
            depths[t][win] = z
            ids[t][win] = 2 + k
    return depths, ids


def _centered_grid(extent: float, inset: float, step: float) -> np.ndarray:
    """1D symmetric grid offsets within [-extent/2 + inset, extent/2 - inset]."""
    span = extent - 2.0 * inset
    if span < 0:
        return np.zeros(0)
    n = int(np.floor(span / step)) + 1
    return (np.arange(n) - (n - 1) / 2.0) * step


def _support(c: float, limit: int) -> tuple[int, ...]:
    """Integer pixels a bilinear sample at coordinate c draws from."""
    f = int(np.floor(c))
    f = min(max(f, 0), limit - 1)
    if c == f or f + 1 >= limit:
        return (f,)
    return (f, f + 1)


def _track_visibility(recipe, ids, tracks, expected):
    """Visible iff in-frame and the bilinear support hits only the expected id."""
    n, T = tracks.shape[0], tracks.shape[1]
    w, h = recipe.width, recipe.height
    vis = np.zeros((n, T), dtype=bool)
    for i in range(n):
        for t in range(T):
            u, v = float(tracks[i, t, 0]), float(tracks[i, t, 1])
            if not (0 <= u <= w - 1 and 0 <= v <= h - 1):
                continue
            want = expected[i, t]
            vis[i, t] = all(
                ids[t, vn, un] == want for un in _support(u, w) for vn in _support(v, h)
            )
    return vis


# ---------------------------------------------------------------------------
# ground truth containers


@dataclass
class ObjectTruth:
    name: str
    class_id: int
    kind: str  # "bg" or "plate"
    size: tuple[float, float]
    centers: np.ndarray  # (T, 3) world center per timestep
    track_slice: tuple[int, int]
    offsets: np.ndarray  # (P, 3) plate-local for plates, absolute world for bg

    def world_points(self, t: int) -> np.ndarray:
        if self.kind == "bg":
            return self.offsets
        return self.centers[t][None, :] + self.offsets

    def displacement(self, t0: int, t1: int) -> np.ndarray:
        return self.centers[t1] - self.centers[t0]


@dataclass
class FixtureTruth:
    scene_id: str
    width: int
    height: int
    focal: float
    num_timesteps: int
    init_timestep: int
    bg_region: tuple[int, int, int, int]
    objects: list[ObjectTruth]
    jumper_index: int | None = None
    contact: dict | None = None

    def object_named(self, name: str) -> ObjectTruth:
        for obj in self.objects:
            if obj.name == name:
                return obj
        raise KeyError(name)

    def winner_at(self, u: float, v: float, t: int) -> int | None:
        """Index into objects of the front-most surface at pixel (u, v)."""
        cx = (self.width - 1) / 2.0
        cy = (self.height - 1) / 2.0
        best = None
        best_z = np.inf
        for j, obj in enumerate(self.objects):
            if obj.kind == "bg":
                continue
            c = obj.centers[t]
            if abs((u - cx) * c[2] / self.focal - c[0]) <= obj.size[0] / 2 and abs(
                (v - cy) * c[2] / self.focal - c[1]
            ) <= obj.size[1] / 2:
                if c[2] < best_z:
                    best, best_z = j, c[2]
        if best is not None:
            return best
        u0, v0, u1, v1 = self.bg_region
        for j, obj in enumerate(self.objects):
            if obj.kind == "bg" and u0 <= u < u1 and v0 <= v < v1:
                return j
        return None

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        for obj in doc["objects"]:
            obj["centers"] = np.asarray(obj["centers"]).tolist()
            obj["offsets"] = np.asarray(obj["offsets"]).tolist()
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "FixtureTruth":
        objects = [
            ObjectTruth(
                name=o["name"],
                class_id=o["class_id"],
                kind=o["kind"],
                size=tuple(o["size"]),
                centers=np.asarray(o["centers"], dtype=np.float64),
                track_slice=tuple(o["track_slice"]),
                offsets=np.asarray(o["offsets"], dtype=np.float64),
            )
            for o in doc["objects"]
        ]
        return cls(
            scene_id=doc["scene_id"],
            width=doc["width"],
            height=doc["height"],
            focal=doc["focal"],
            num_timesteps=doc["num_timesteps"],
            init_timestep=doc["init_timestep"],
            bg_region=tuple(doc["bg_region"]),
            objects=objects,
            jumper_index=doc.get("jumper_index"),
            contact=doc.get("contact"),
        )

    def save(self, path: str | os.PathLike) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n")
        return path

    @classmethod
    def load(cls, path: str | os.PathLike) -> "FixtureTruth":
        return cls.from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# generation


def _bg_tracks(recipe: SceneRecipe) -> np.ndarray:
    """Static integer pixel grid on the background, clear of every swept rect."""
    u0, v0, u1, v1 = recipe.region()
    step = recipe.bg_track_step_px
    us = np.arange(u0 + BG_INSET_PX, u1 - BG_INSET_PX, step)
    vs = np.arange(v0 + BG_INSET_PX, v1 - BG_INSET_PX, step)
    uu, vv = np.meshgrid(us, vs, indexing="xy")
    cand = np.stack([uu.ravel(), vv.ravel()], axis=1).astype(np.float64)
    keep = np.ones(len(cand), dtype=bool)
    if not recipe.avoid_sweeps:
        return cand
    for p in recipe.plates:
        rects = np.asarray([_rect_px(recipe, p, t) for t in range(recipe.num_timesteps)])
        su0, sv0 = rects[:, 0].min() - SWEEP_PAD_PX, rects[:, 1].min() - SWEEP_PAD_PX
        su1, sv1 = rects[:, 2].max() + SWEEP_PAD_PX, rects[:, 3].max() + SWEEP_PAD_PX
        inside = (
            (cand[:, 0] >= su0) & (cand[:, 0] <= su1) & (cand[:, 1] >= sv0) & (cand[:, 1] <= sv1)
        )
        keep &= ~inside
    return cand[keep]


def _flat_stride_cols(depth: np.ndarray, ids: np.ndarray, obj_id: int, stride: int = 4):
    """Pixel columns of obj whose stride-grid pixels sit on locally flat depth."""
    h, w = depth.shape
    vv, uu = np.meshgrid(np.arange(0, h, stride), np.arange(0, w, stride), indexing="ij")
    u, v = uu.ravel(), vv.ravel()
    ok = ids[v, u] == obj_id
    u, v = u[ok], v[ok]
    flat = np.ones(len(u), dtype=bool)
    for du, dv in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        un = np.clip(u + du, 0, w - 1)
        vn = np.clip(v + dv, 0, h - 1)
        flat &= depth[vn, un] == depth[v, u]
    return np.unique(u[flat])


def generate_fixture(recipe: SceneRecipe) -> tuple[SceneBundle, FixtureTruth]:
    """Render the recipe into a SceneBundle plus its analytic ground truth."""
    validate_recipe(recipe)
    T = recipe.num_timesteps
    f = recipe.focal
    init_t = recipe.init_timestep if recipe.init_timestep is not None else T // 2
    depths, ids = _render(recipe)

    objects: list[ObjectTruth] = []
    track_blocks: list[np.ndarray] = []
    expected_blocks: list[np.ndarray] = []
    cursor = 0

    bg_px = _bg_tracks(recipe)
    bg_world = np.stack(
        [
            (bg_px[:, 0] - recipe.cx) * recipe.bg_z / f,
            (bg_px[:, 1] - recipe.cy) * recipe.bg_z / f,
            np.full(len(bg_px), recipe.bg_z),
        ],
        axis=1,
    )
    bg_tracks = np.repeat(bg_px[:, None, :], T, axis=1)
    objects.append(
        ObjectTruth(
            name="background",
            class_id=recipe.bg_class,
            kind="bg",
            size=(0.0, 0.0),
            centers=np.tile(np.array([0.0, 0.0, recipe.bg_z]), (T, 1)),
            track_slice=(cursor, cursor + len(bg_px)),
            offsets=bg_world,
        )
    )
    track_blocks.append(bg_tracks)
    expected_blocks.append(np.ones((len(bg_px), T), dtype=np.int16))
    cursor += len(bg_px)

    for k, p in enumerate(recipe.plates):
        ox = _centered_grid(p.size[0], p.track_inset, p.track_step)
        oy = _centered_grid(p.size[1], p.track_inset, p.track_step)
        gx, gy = np.meshgrid(ox, oy, indexing="xy")
        offsets = np.stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)], axis=1)
        centers = np.stack([p.center(t) for t in range(T)])
        world = centers[None, :, :] + offsets[:, None, :]  # (P, T, 3)
        px = np.empty((len(offsets), T, 2))
        px[:, :, 0] = recipe.cx + f * world[:, :, 0] / world[:, :, 2]
        px[:, :, 1] = recipe.cy + f * world[:, :, 1] / world[:, :, 2]
        objects.append(
            ObjectTruth(
                name=p.name,
                class_id=p.class_id,
                kind="plate",
                size=p.size,
                centers=centers,
                track_slice=(cursor, cursor + len(offsets)),
                offsets=offsets,
            )
        )
        track_blocks.append(px)
        expected_blocks.append(np.full((len(offsets), T), 2 + k, dtype=np.int16))
        cursor += len(offsets)

    jumper_index = None
    if recipe.jumper is not None:
        jp = np.empty((1, T, 2))
        for t in range(T):
            u, v = recipe.jumper.pixel_a if t % 2 == 0 else recipe.jumper.pixel_b
            jp[0, t] = (u, v)
        track_blocks.append(jp)
        # whatever surface the pixel lands on counts as the expectation
        exp = np.array(
            [[ids[t, int(jp[0, t, 1]), int(jp[0, t, 0])] for t in range(T)]], dtype=np.int16
        )
        expected_blocks.append(exp)
        jumper_index = cursor
        cursor += 1

    tracks = np.concatenate(track_blocks, axis=0).astype(np.float32)
    expected = np.concatenate(expected_blocks, axis=0)
    visibility = _track_visibility(recipe, ids, tracks, expected)

    lut = np.zeros(2 + len(recipe.plates), dtype=np.uint16)
    lut[1] = recipe.bg_class
    for k, p in enumerate(recipe.plates):
        lut[2 + k] = p.class_id
    masks = lut[ids]

    class_names = dict(recipe.class_names)
    class_names.setdefault(recipe.bg_class, "background")
    for p in recipe.plates:
        class_names.setdefault(p.class_id, p.name)

    manifest = SceneManifest(
        scene_id=recipe.scene_id,
        num_timesteps=T,
        frame_stride=recipe.frame_stride,
        fps=recipe.fps,
        width=recipe.width,
        height=recipe.height,
        depth_units="meters",
        track_init_timestep=init_t,
        class_names=class_names,
        frames_dir="frames" if recipe.emit_frames else None,
    )
    camera = CameraModel(fx=f, fy=f, cx=recipe.cx, cy=recipe.cy, poses=identity_poses(T))
    extra = ()
    if recipe.multi_seed:
        extra = (
            TrackSet(tracks=tracks, visibility=visibility, init_timestep=0),
            TrackSet(tracks=tracks, visibility=visibility, init_timestep=T - 1),
        )
    bundle = SceneBundle(
        manifest=manifest,
        camera=camera,
        depths=depths,
        tracks=tracks,
        visibility=visibility,
        masks=masks,
        extra_track_sets=extra,
    )
    truth = FixtureTruth(
        scene_id=recipe.scene_id,
        width=recipe.width,
        height=recipe.height,
        focal=f,
        num_timesteps=T,
        init_timestep=init_t,
        bg_region=recipe.region(),
        objects=objects,
        jumper_index=jumper_index,
    )
    if recipe.contact_pair is not None:
        truth.contact = _contact_truth(recipe, truth, depths[init_t], ids[init_t], init_t)
    return bundle, truth


def _contact_truth(recipe, truth, depth_obs, ids_obs, init_t) -> dict:
    """Closed-form distance series between the contact pair.

    Both plates share a depth plane and aligned rows, so the min distance
    between their interpolated point sets is a pure x gap: the analytic
    edge gap plus a constant offset measured from the stride-grid columns
    actually present at the observation frame.
    """
    names = [o.name for o in truth.objects]
    ja = names.index(recipe.contact_pair[0])
    jb = names.index(recipe.contact_pair[1])
    a, b = truth.objects[ja], truth.objects[jb]
    f, T = recipe.focal, recipe.num_timesteps

    za = a.centers[init_t, 2]
    cols_a = _flat_stride_cols(depth_obs, ids_obs, ja + 1)
    cols_b = _flat_stride_cols(depth_obs, ids_obs, jb + 1)
    if len(cols_a) == 0 or len(cols_b) == 0:
        raise RecipeInvalid("contact pair has no interior stride pixels at init_timestep")
    xa = (cols_a.max() - recipe.cx) * za / f - a.centers[init_t, 0]  # plate-local edge column
    xb = (cols_b.min() - recipe.cx) * za / f - b.centers[init_t, 0]

    gap = np.array(
        [
            (b.centers[t, 0] - b.size[0] / 2) - (a.centers[t, 0] + a.size[0] / 2)
            for t in range(T)
        ]
    )
    # x gap between the nearest stride columns exceeds the edge gap by a
    # constant offset; dist stays a pure x difference because rows align
    c_dense = xb - xa + (a.size[0] / 2 + b.size[0] / 2)
    dist = np.maximum(gap, 0.0) + c_dense
    t_contact = int(np.argmin(dist))
    speeds = np.abs(np.diff(gap))
    step = float(np.median(speeds[speeds > 1e-12]))
    threshold = float(c_dense + 2.5 * step)
    inside = dist <= threshold
    runs = []
    start = None
    for t in range(T):
        if inside[t] and start is None:
            start = t
        if not inside[t] and start is not None:
            runs.append([start, t - 1])
            start = None
    if start is not None:
        runs.append([start, T - 1])
    disp = b.displacement(0, t_contact)
    peak = np.abs(disp).max()
    direction = [0 if abs(d) < 0.25 * peak else int(np.sign(d)) for d in disp]
    point = [
        float(a.centers[t_contact, 0] + a.size[0] / 2),
        float((a.centers[t_contact, 1] + b.centers[t_contact, 1]) / 2),
        float(za),
    ]
    return {
        "a": a.name,
        "b": b.name,
        "t_contact": t_contact,
        "point": point,
        "threshold": threshold,
        "pit": t_contact,
        "intervals": runs,
        "direction": direction,
        "span": [0, t_contact],
        "dist_series": dist.tolist(),
        "c_dense": float(c_dense),
    }


def write_fixture(recipe: SceneRecipe, out_dir: str | os.PathLike) -> tuple[Path, Path]:
    """Render and persist a fixture. Returns (manifest_path, truth_path)."""
    out_dir = Path(out_dir)
    bundle, truth = generate_fixture(recipe)
    manifest_path = write_bundle(bundle, out_dir)
    truth_path = truth.save(out_dir / "truth.json")
    if recipe.emit_frames:
        _emit_frames(bundle, out_dir / "frames")
    return manifest_path, truth_path


def _emit_frames(bundle: SceneBundle, frames_dir: Path) -> None:
    from PIL import Image

    frames_dir.mkdir(parents=True, exist_ok=True)
    depths = bundle.depths
    pos = depths[depths > 0]
    zmin, zmax = (float(pos.min()), float(pos.max())) if pos.size else (0.0, 1.0)
    span = max(zmax - zmin, 1e-9)
    stride = bundle.manifest.frame_stride
    for t in range(bundle.manifest.num_timesteps):
        z = depths[t]
        img = np.where(z > 0, 230.0 - 180.0 * (z - zmin) / span, 0.0).astype(np.uint8)
        name = bundle.manifest.frame_pattern.format(t=t * stride)
        Image.fromarray(img, mode="L").save(frames_dir / name)


# ---------------------------------------------------------------------------
# presets


def _px2m(px: float, z: float, focal: float) -> float:
    return px * z / focal


def preset(name: str, **overrides) -> SceneRecipe:
    """Named recipes sized for a 160x128, T=20 desk scene."""
    f = 120.0
    if name == "rigid":
        # background plate on the left, a mover drifting over the void on
        # the right; nothing ever occludes anything
        z = 1.5
        mover = PlateSpec(
            name="mover",
            class_id=2,
            size=(_px2m(44, z, f), _px2m(36, z, f)),
            waypoints=((0, (0.52, -0.12, z)), (19, (0.33, 0.10, z))),
            track_step=_px2m(8, z, f),
            track_inset=_px2m(2.5, z, f),
        )
        recipe = SceneRecipe(
            scene_id="rigid",
            bg_region=(0, 0, 80, 128),
            bg_track_step_px=10,
            plates=(mover,),
            class_names={1: "tissue", 2: "mover"},
        )
    elif name == "occlusion":
        # a near box sweeping across a full-frame plane
        z = 0.8
        box = PlateSpec(
            name="box",
            class_id=2,
            size=(_px2m(40, z, f), _px2m(36, z, f)),
            waypoints=((0, (-0.33, 0.0, z)), (19, (0.33, 0.0, z))),
            track_step=_px2m(7, z, f),
            track_inset=_px2m(2.5, z, f),
        )
        recipe = SceneRecipe(
            scene_id="occlusion",
            bg_track_step_px=12,
            plates=(box,),
            avoid_sweeps=False,  # the whole point is plane tracks under the box
            class_names={1: "tissue", 2: "box"},
        )
    elif name == "jumper":
        z = 0.5
        plate = PlateSpec(
            name="plate",
            class_id=2,
            size=(_px2m(60, z, f), _px2m(40, z, f)),
            waypoints=((0, (-0.125, 0.0, z)),),
            track_step=_px2m(8, z, f),
            track_inset=_px2m(2.5, z, f),
        )
        recipe = SceneRecipe(
            scene_id="jumper",
            bg_track_step_px=16,
            plates=(plate,),
            jumper=JumperSpec(pixel_a=(120, 64), pixel_b=(50, 64)),
            class_names={1: "tissue", 2: "plate"},
        )
    elif name == "contact":
        z = 1.6
        size = (_px2m(45, z, f), _px2m(40, z, f))
        step = _px2m(6, z, f)
        inset = _px2m(2.5, z, f)
        left = PlateSpec(
            name="anvil",
            class_id=2,
            size=size,
            waypoints=((0, (-0.3, 0.0, z)),),
            track_step=step,
            track_inset=inset,
        )
        # contact lands away from the dense binding frame (t_obs = 10), so
        # edge points bind to their own plate's controls only
        right = PlateSpec(
            name="pusher",
            class_id=3,
            size=size,
            waypoints=((0, (0.7, 0.0, z)), (14, (0.3, 0.0, z)), (19, (0.5, 0.0, z))),
            track_step=step,
            track_inset=inset,
        )
        recipe = SceneRecipe(
            scene_id="contact",
            plates=(left, right),
            contact_pair=("anvil", "pusher"),
            class_names={1: "tissue", 2: "anvil", 3: "pusher"},
        )
    elif name == "separated":
        # same class, far apart: must never merge
        z = 1.9
        size = (_px2m(24, z, f), _px2m(24, z, f))
        kw = dict(
            class_id=2,
            size=size,
            track_step=_px2m(4, z, f),
            track_inset=_px2m(2.5, z, f),
        )
        recipe = SceneRecipe(
            scene_id="separated",
            plates=(
                PlateSpec(name="west", waypoints=((0, (-0.95, 0.0, z)),), **kw),
                PlateSpec(name="east", waypoints=((0, (0.95, 0.0, z)),), **kw),
            ),
            bg_track_step_px=24,
            class_names={1: "tissue", 2: "block"},
        )
    else:
        raise RecipeInvalid(f"unknown preset {name!r}")
    if overrides:
        recipe = dataclasses.replace(recipe, **overrides)
    validate_recipe(recipe)
    return recipe


PRESETS = ("rigid", "occlusion", "jumper", "contact", "separated")


# ---------------------------------------------------------------------------
# query generation (contact scenes)


def resolve_instance(scene, class_id: int, center: np.ndarray) -> int:
    """Instance id whose reference-time centroid is nearest to center."""
    from .toolkit import centroid_at

    t_ref = scene.instances.t_ref
    best, best_d = None, np.inf
    for inst in scene.instances.instances:
        if inst.class_id != class_id:
            continue
        c = centroid_at(scene, inst.instance_id, t_ref)
        d = float(np.linalg.norm(c - center))
        if d < best_d:
            best, best_d = inst.instance_id, d
    if best is None:
        raise UnknownInstance(f"no instance with class {class_id}")
    return best


def make_queries(scene, truth: FixtureTruth):
    """One query fixture per metric category, phrased for the scripted agent."""
    from .evaluation import QueryFixture
    from .lifting import project

    if truth.contact is None:
        raise RecipeInvalid("make_queries needs a contact fixture")
    ct = truth.contact
    obj_a = truth.object_named(ct["a"])
    obj_b = truth.object_named(ct["b"])
    t_ref = scene.instances.t_ref
    a = resolve_instance(scene, obj_a.class_id, obj_a.centers[t_ref])
    b = resolve_instance(scene, obj_b.class_id, obj_b.centers[t_ref])
    tc = ct["t_contact"]
    u, v, _ = project(np.asarray(ct["point"]), scene.camera, tc)
    sid = truth.scene_id
    return [
        QueryFixture(
            scene_id=sid,
            query=(
                f"Where do instances {a} and {b} come into contact at t={tc}? "
                "Give the 3D contact point."
            ),
            query_type="spatial",
            gt_pixel=(float(u), float(v)),
            t=tc,
        ),
        QueryFixture(
            scene_id=sid,
            query=f"At which timestep are instances {a} and {b} closest to each other?",
            query_type="temporal_pit",
            gt_timestep=ct["pit"],
        ),
        QueryFixture(
            scene_id=sid,
            query=(
                f"During which timesteps are instances {a} and {b} within "
                f"{ct['threshold']:.4f} meters of each other?"
            ),
            query_type="temporal_interval",
            gt_intervals=tuple(tuple(r) for r in ct["intervals"]),
        ),
        QueryFixture(
            scene_id=sid,
            query=(
                f"In which direction does instance {b} move "
                f"from t={ct['span'][0]} to t={ct['span'][1]}?"
            ),
            query_type="directional",
            gt_direction=tuple(ct["direction"]),
        ),
    ]
