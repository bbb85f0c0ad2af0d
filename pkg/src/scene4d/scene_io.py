"""On-disk scene format: JSON manifest plus raw little-endian tensor blobs.

A scene directory holds one ``manifest.json`` and one blob per tensor
(depths, tracks, visibility, masks, optional extrinsics, optional extra
track sets for multi-seed tracking). Loading materializes everything into
immutable numpy arrays; validation distinguishes hard schema errors
(raised) from data-quality findings (collected into a report).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .container import dump_json, load_json, read_blob, write_blob
from .errors import MissingFile, SchemaViolation, ShapeMismatch

DEFAULT_FPS = 25.0
DEFAULT_FRAME_STRIDE = 4
ORTHONORMAL_TOL = 1e-6


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics plus per-timestep camera-to-world rigid poses.

    Axes: +x right, +y down, +z into the scene.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    poses: np.ndarray  # (T, 3, 4), row t is [R | t] mapping camera -> world

    @property
    def rotations(self) -> np.ndarray:
        return self.poses[:, :, :3]

    @property
    def translations(self) -> np.ndarray:
        return self.poses[:, :, 3]

    def __len__(self) -> int:
        return self.poses.shape[0]


def identity_poses(num_timesteps: int) -> np.ndarray:
    pose = np.hstack([np.eye(3), np.zeros((3, 1))])
    return np.broadcast_to(pose, (num_timesteps, 3, 4)).copy()


@dataclass(frozen=True)
class TrackSet:
    """One tracker run: pixel tracks, per-point visibility, seed frame."""

    tracks: np.ndarray  # (N, T, 2) float, (u, v) pixel coords
    visibility: np.ndarray  # (N, T) bool
    init_timestep: int


@dataclass(frozen=True)
class SceneManifest:
    scene_id: str
    num_timesteps: int
    frame_stride: int
    fps: float
    width: int
    height: int
    depth_units: str
    track_init_timestep: int
    class_names: dict[int, str]
    frames_dir: str | None = None
    frame_pattern: str = "frame_{t:05d}.png"


@dataclass(frozen=True)
class SceneBundle:
    manifest: SceneManifest
    camera: CameraModel
    depths: np.ndarray  # (T, H, W) float32, meters
    tracks: np.ndarray  # (N, T, 2) float32
    visibility: np.ndarray  # (N, T) bool
    masks: np.ndarray  # (T, H, W) integer class ids, 0 = background
    extra_track_sets: tuple[TrackSet, ...] = ()

    @property
    def num_timesteps(self) -> int:
        return self.manifest.num_timesteps

    @property
    def num_tracks(self) -> int:
        return self.tracks.shape[0]


@dataclass
class Violation:
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    advisories: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict[str, Any]:
        return {
            "ok": self.ok,
            "violations": [{"field": v.field, "message": v.message} for v in self.violations],
            "advisories": list(self.advisories),
        }

    def __str__(self) -> str:
        if self.ok and not self.advisories:
            return "ok"
        lines = [str(v) for v in self.violations]
        lines += [f"advisory: {a}" for a in self.advisories]
        return "\n".join(lines)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def _require(obj: dict, key: str, kind, field_name: str | None = None):
    name = field_name or key
    if key not in obj:
        raise SchemaViolation(name, "missing required field")
    val = obj[key]
    if kind is float:
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            raise SchemaViolation(name, f"expected number, got {type(val).__name__}")
        return float(val)
    if kind is int:
        if not isinstance(val, int) or isinstance(val, bool):
            raise SchemaViolation(name, f"expected integer, got {type(val).__name__}")
        return val
    if not isinstance(val, kind):
        raise SchemaViolation(name, f"expected {kind.__name__}, got {type(val).__name__}")
    return val


def _load_track_pair(base: Path, entry: dict, prefix: str, t: int, w: int, h: int):
    tf = f"{prefix}tracks"
    vf = f"{prefix}visibility"
    tracks = read_blob(base, tf, entry["tracks"])
    vis_raw = read_blob(base, vf, entry["visibility"])
    if tracks.ndim != 3 or tracks.shape[2] != 2:
        raise ShapeMismatch(tf, f"expected (N, T, 2), got {tracks.shape}")
    if tracks.shape[1] != t:
        raise ShapeMismatch(tf, f"T axis is {tracks.shape[1]}, manifest says {t}")
    if not np.issubdtype(tracks.dtype, np.floating):
        raise SchemaViolation(tf, f"expected float dtype, got {tracks.dtype}")
    if vis_raw.shape != tracks.shape[:2]:
        raise ShapeMismatch(vf, f"shape {vis_raw.shape} does not match tracks {tracks.shape[:2]}")
    bad = (vis_raw != 0) & (vis_raw != 1)
    if bad.any():
        raise SchemaViolation(vf, "values must be 0 or 1")
    vis = vis_raw.astype(bool)
    if vis.any():
        u = tracks[..., 0][vis]
        v = tracks[..., 1][vis]
        finite = np.isfinite(u) & np.isfinite(v)
        inside = finite & (u >= 0) & (u < w) & (v >= 0) & (v < h)
        if not inside.all():
            ui, vi = float(u[~inside][0]), float(v[~inside][0])
            raise SchemaViolation(tf, f"visible coordinate ({ui}, {vi}) outside [0,{w})x[0,{h})")
    return _freeze(tracks), _freeze(vis)


def load_scene(manifest_path: str | os.PathLike) -> SceneBundle:
    """Load and validate a scene directory from its manifest path."""
    path = Path(manifest_path)
    raw = load_json(path, "manifest")
    if not isinstance(raw, dict):
        raise SchemaViolation("manifest", "top level must be a JSON object")
    base = path.parent

    scene_id = _require(raw, "scene_id", str)
    t = _require(raw, "num_timesteps", int)
    if t < 2:
        raise SchemaViolation("num_timesteps", f"must be >= 2, got {t}")
    stride = raw.get("frame_stride", DEFAULT_FRAME_STRIDE)
    if not isinstance(stride, int) or stride < 1:
        raise SchemaViolation("frame_stride", f"must be an integer >= 1, got {stride!r}")
    fps = float(raw.get("fps", DEFAULT_FPS))
    if not fps > 0:
        raise SchemaViolation("fps", f"must be > 0, got {fps}")
    w = _require(raw, "width", int)
    h = _require(raw, "height", int)
    if w < 1 or h < 1:
        raise SchemaViolation("width" if w < 1 else "height", "must be >= 1")

    intr = _require(raw, "intrinsics", dict)
    fx = _require(intr, "fx", float, "intrinsics.fx")
    fy = _require(intr, "fy", float, "intrinsics.fy")
    cx = _require(intr, "cx", float, "intrinsics.cx")
    cy = _require(intr, "cy", float, "intrinsics.cy")
    if fx <= 0 or fy <= 0:
        raise SchemaViolation("intrinsics", f"fx and fy must be > 0, got ({fx}, {fy})")

    tensors = _require(raw, "tensors", dict)
    for key in ("depths", "tracks", "visibility", "masks"):
        if key not in tensors:
            raise SchemaViolation(f"tensors.{key}", "missing tensor descriptor")

    depths = read_blob(base, "depths", tensors["depths"])
    if depths.shape != (t, h, w):
        raise ShapeMismatch("depths", f"expected {(t, h, w)}, got {depths.shape}")
    if not np.issubdtype(depths.dtype, np.floating):
        raise SchemaViolation("depths", f"expected float dtype, got {depths.dtype}")

    tracks, vis = _load_track_pair(base, tensors, "", t, w, h)

    masks = read_blob(base, "masks", tensors["masks"])
    if masks.shape != (t, h, w):
        raise ShapeMismatch("masks", f"expected {(t, h, w)}, got {masks.shape}")
    if not np.issubdtype(masks.dtype, np.integer):
        raise SchemaViolation("masks", f"expected integer dtype, got {masks.dtype}")

    if "extrinsics" in raw and raw["extrinsics"] is not None:
        poses = read_blob(base, "extrinsics", raw["extrinsics"])
        poses = poses.astype(np.float64)
        if poses.shape != (t, 3, 4):
            raise ShapeMismatch("extrinsics", f"expected {(t, 3, 4)}, got {poses.shape}")
        rot = poses[:, :, :3]
        err = np.abs(rot @ rot.transpose(0, 2, 1) - np.eye(3)).max()
        if err > ORTHONORMAL_TOL:
            raise SchemaViolation("extrinsics", f"rotation not orthonormal (max |R Rt - I| = {err:.2e})")
    else:
        poses = identity_poses(t)

    init_t = raw.get("track_init_timestep", t // 2)
    if not isinstance(init_t, int) or not 0 <= init_t < t:
        raise SchemaViolation("track_init_timestep", f"must be in [0, {t}), got {init_t!r}")

    classes_raw = raw.get("classes", {})
    if not isinstance(classes_raw, dict):
        raise SchemaViolation("classes", "must be an object mapping class id to name")
    class_names: dict[int, str] = {}
    for key, name in classes_raw.items():
        try:
            cid = int(key)
        except ValueError:
            raise SchemaViolation("classes", f"class id {key!r} is not an integer") from None
        if not isinstance(name, str):
            raise SchemaViolation("classes", f"name for class {cid} must be a string")
        class_names[cid] = name

    extra_sets: list[TrackSet] = []
    for i, entry in enumerate(raw.get("extra_track_sets", [])):
        prefix = f"extra_track_sets[{i}]."
        if not isinstance(entry, dict) or "tracks" not in entry or "visibility" not in entry:
            raise SchemaViolation(prefix[:-1], "each entry needs tracks and visibility descriptors")
        et, ev = _load_track_pair(base, entry, prefix, t, w, h)
        eit = entry.get("init_timestep", init_t)
        if not isinstance(eit, int) or not 0 <= eit < t:
            raise SchemaViolation(f"{prefix}init_timestep", f"must be in [0, {t}), got {eit!r}")
        extra_sets.append(TrackSet(et, ev, eit))

    frames = raw.get("frames")
    frames_dir = None
    frame_pattern = "frame_{t:05d}.png"
    if frames is not None:
        if not isinstance(frames, dict) or "dir" not in frames:
            raise SchemaViolation("frames", "must be an object with a 'dir' entry")
        frames_dir = str(Path(base, frames["dir"]))
        frame_pattern = frames.get("pattern", frame_pattern)

    manifest = SceneManifest(
        scene_id=scene_id,
        num_timesteps=t,
        frame_stride=stride,
        fps=fps,
        width=w,
        height=h,
        depth_units=str(raw.get("depth_units", "meters")),
        track_init_timestep=init_t,
        class_names=class_names,
        frames_dir=frames_dir,
        frame_pattern=frame_pattern,
    )
    camera = CameraModel(fx=fx, fy=fy, cx=cx, cy=cy, poses=_freeze(poses))
    return SceneBundle(
        manifest=manifest,
        camera=camera,
        depths=_freeze(depths),
        tracks=tracks,
        visibility=vis,
        masks=_freeze(masks),
        extra_track_sets=tuple(extra_sets),
    )


def _first_index(flat_bad: np.ndarray, shape: tuple) -> tuple:
    return np.unravel_index(int(np.argmax(flat_bad)), shape)


def validate_bundle(bundle: SceneBundle) -> ValidationReport:
    """Check every bundle invariant; findings are data, nothing raises."""
    rep = ValidationReport()
    m = bundle.manifest
    t, h, w = m.num_timesteps, m.height, m.width

    if t < 2:
        rep.violations.append(Violation("num_timesteps", f"must be >= 2, got {t}"))
    if m.frame_stride < 1:
        rep.violations.append(Violation("frame_stride", f"must be >= 1, got {m.frame_stride}"))

    if bundle.depths.shape != (t, h, w):
        rep.violations.append(
            Violation("depths", f"shape {bundle.depths.shape} != expected {(t, h, w)}")
        )
    else:
        bad = ~np.isfinite(bundle.depths) | (bundle.depths < 0)
        if bad.any():
            ti, vi, ui = _first_index(bad.ravel(), bad.shape)
            n_bad = int(bad.sum())
            val = float(bundle.depths[ti, vi, ui])
            rep.violations.append(
                Violation(
                    "depths",
                    f"negative or non-finite depth {val} at [t={ti}, v={vi}, u={ui}]"
                    + (f" ({n_bad} pixels total)" if n_bad > 1 else ""),
                )
            )

    if bundle.tracks.shape[:2] != bundle.visibility.shape or bundle.tracks.shape[2:] != (2,):
        rep.violations.append(
            Violation("tracks", f"tracks {bundle.tracks.shape} / visibility {bundle.visibility.shape} mismatch")
        )
    else:
        vis = bundle.visibility
        if vis.any():
            u = bundle.tracks[..., 0]
            v = bundle.tracks[..., 1]
            bad = vis & ~(
                np.isfinite(u) & np.isfinite(v) & (u >= 0) & (u < w) & (v >= 0) & (v < h)
            )
            if bad.any():
                ni, ti = _first_index(bad.ravel(), bad.shape)
                n_bad = int(bad.sum())
                rep.violations.append(
                    Violation(
                        "tracks",
                        f"visible coordinate ({float(u[ni, ti])}, {float(v[ni, ti])}) at "
                        f"[point={ni}, t={ti}] outside [0,{w})x[0,{h})"
                        + (f" ({n_bad} samples total)" if n_bad > 1 else ""),
                    )
                )

    if bundle.masks.shape != (t, h, w):
        rep.violations.append(Violation("masks", f"shape {bundle.masks.shape} != expected {(t, h, w)}"))
    else:
        # class 0 is implicit background and needs no table entry
        present = np.unique(bundle.masks)
        missing = [int(c) for c in present if c != 0 and int(c) not in m.class_names]
        if missing:
            rep.violations.append(
                Violation("classes", f"mask class ids {missing} missing from class table")
            )

    cam = bundle.camera
    if cam.fx <= 0 or cam.fy <= 0:
        rep.violations.append(Violation("intrinsics", f"fx, fy must be > 0, got ({cam.fx}, {cam.fy})"))
    if cam.poses.shape != (t, 3, 4):
        rep.violations.append(
            Violation("extrinsics", f"poses shape {cam.poses.shape} != expected {(t, 3, 4)}")
        )
    else:
        rot = cam.rotations
        err = float(np.abs(rot @ rot.transpose(0, 2, 1) - np.eye(3)).max())
        if err > ORTHONORMAL_TOL:
            rep.violations.append(
                Violation("extrinsics", f"rotation not orthonormal (max |R Rt - I| = {err:.2e})")
            )

    if not 0 <= m.track_init_timestep < t:
        rep.violations.append(
            Violation("track_init_timestep", f"must be in [0, {t}), got {m.track_init_timestep}")
        )

    if m.depth_units != "meters":
        rep.advisories.append(
            f"depth_units is {m.depth_units!r}; metric queries will be in those units, not meters"
        )
    return rep


def write_bundle(bundle: SceneBundle, out_dir: str | os.PathLike) -> Path:
    """Write a bundle as manifest + blobs; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    m = bundle.manifest

    tensors = {
        "depths": write_blob(out, "depths.bin", bundle.depths),
        "tracks": write_blob(out, "tracks.bin", bundle.tracks),
        "visibility": write_blob(out, "visibility.bin", bundle.visibility.astype(np.uint8)),
        "masks": write_blob(out, "masks.bin", bundle.masks),
    }
    doc: dict[str, Any] = {
        "scene_id": m.scene_id,
        "num_timesteps": m.num_timesteps,
        "frame_stride": m.frame_stride,
        "fps": m.fps,
        "width": m.width,
        "height": m.height,
        "depth_units": m.depth_units,
        "track_init_timestep": m.track_init_timestep,
        "intrinsics": {
            "fx": bundle.camera.fx,
            "fy": bundle.camera.fy,
            "cx": bundle.camera.cx,
            "cy": bundle.camera.cy,
        },
        "extrinsics": write_blob(out, "extrinsics.bin", bundle.camera.poses.astype(np.float64)),
        "tensors": tensors,
        "classes": {str(k): v for k, v in sorted(m.class_names.items())},
    }
    if bundle.extra_track_sets:
        entries = []
        for i, ts in enumerate(bundle.extra_track_sets):
            entries.append(
                {
                    "tracks": write_blob(out, f"extra_tracks_{i}.bin", ts.tracks),
                    "visibility": write_blob(
                        out, f"extra_visibility_{i}.bin", ts.visibility.astype(np.uint8)
                    ),
                    "init_timestep": ts.init_timestep,
                }
            )
        doc["extra_track_sets"] = entries
    if m.frames_dir is not None:
        rel = os.path.relpath(m.frames_dir, out) if os.path.isabs(m.frames_dir) else m.frames_dir
        doc["frames"] = {"dir": rel, "pattern": m.frame_pattern}

    manifest_path = out / "manifest.json"
    dump_json(manifest_path, doc)
    return manifest_path
