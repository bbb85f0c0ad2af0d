"""End-to-end orchestration: bundle -> controls -> dense -> instances.

One config object covers every stage and hashes to a fingerprint, so a
build is a pure function of (bundle bytes, config). Stage outputs can be
cached by content hash, which lets ablation sweeps reuse whatever they do
not change.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .container import dump_json, load_json, read_blob, write_blob
from .densification import DensifyConfig, DensePointCloud, assign_pixels, attach_semantics, densify
from .errors import Scene4DError
from .lifting import (
    ControlPointCloud,
    LiftConfig,
    depth_gradient_mask,
    lift_track_set,
    lift_tracks,
    merge_track_sets,
)
from .scene_io import CameraModel, SceneBundle, SceneManifest, load_scene
from .semantics import (
    DEFAULT_PRESENCE_FRACTION,
    DEFAULT_TAU,
    FrameInstance,
    InstanceTable,
    MergeConfig,
    PersistentInstance,
    build_instances,
)
from .toolkit import DIRECTION_DEADZONE, Scene4D

FORMAT = "scene4d-build/1"


@dataclass(frozen=True)
class PipelineConfig:
    lift: LiftConfig = field(default_factory=LiftConfig)
    densify: DensifyConfig = field(default_factory=DensifyConfig)
    seed_frames: tuple[int, ...] | None = None  # None: first, middle, last
    t_ref: int | None = None  # None: middle frame
    radius: float | None = None  # None: derived from control spacing
    tau: float = DEFAULT_TAU
    min_component_pixels: int = 1
    connectivity: int = 4
    presence_fraction: float = DEFAULT_PRESENCE_FRACTION
    multi_frame: bool = False  # lift extra tracker seeds and merge them
    direction_deadzone: float = DIRECTION_DEADZONE

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


# ablation sweep: label -> config transform
ABLATIONS: dict[str, str] = {
    "full": "Full",
    "no_jump_filter": "No Jump Filter",
    "no_depth_maintenance": "No Depth Maintenance",
    "multi_frame": "Multi-frame Tracking",
}


def ablation_config(base: PipelineConfig, name: str) -> PipelineConfig:
    if name == "full":
        return base
    if name == "no_jump_filter":
        return dataclasses.replace(
            base, lift=dataclasses.replace(base.lift, enable_jump_filter=False)
        )
    if name == "no_depth_maintenance":
        return dataclasses.replace(
            base, lift=dataclasses.replace(base.lift, enable_depth_maintenance=False)
        )
    if name == "multi_frame":
        return dataclasses.replace(base, multi_frame=True)
    raise ValueError(f"unknown ablation {name!r}; expected one of {sorted(ABLATIONS)}")


@contextmanager
def _stage(name: str):
    try:
        yield
    except Scene4DError as exc:
        exc.args = (f"stage {name}: {exc}",)
        raise


def bundle_digest(bundle: SceneBundle) -> str:
    """Content hash of everything a build reads from the bundle."""
    h = hashlib.sha256()
    m = bundle.manifest
    h.update(
        json.dumps(
            {
                "scene_id": m.scene_id,
                "num_timesteps": m.num_timesteps,
                "width": m.width,
                "height": m.height,
                "track_init_timestep": m.track_init_timestep,
                "class_names": {str(k): v for k, v in m.class_names.items()},
                "camera": [bundle.camera.fx, bundle.camera.fy, bundle.camera.cx, bundle.camera.cy],
            },
            sort_keys=True,
        ).encode()
    )
    for arr in (bundle.camera.poses, bundle.depths, bundle.tracks, bundle.visibility, bundle.masks):
        h.update(np.ascontiguousarray(arr).tobytes())
    for ts in bundle.extra_track_sets:
        h.update(np.int64(ts.init_timestep).tobytes())
        h.update(np.ascontiguousarray(ts.tracks).tobytes())
        h.update(np.ascontiguousarray(ts.visibility).tobytes())
    return h.hexdigest()


def _cache_path(cache_dir, kind: str, key: str) -> Path | None:
    if cache_dir is None:
        return None
    return Path(cache_dir) / f"{kind}-{key[:32]}.npz"


def _controls_from_cache(path: Path) -> ControlPointCloud:
    with np.load(path) as z:
        return ControlPointCloud(
            positions=z["positions"],
            visibility=z["visibility"],
            alive=z["alive"],
            init_timestep=int(z["init_timestep"]),
            pixels=z["pixels"],
            cam_depths=z["cam_depths"],
            init_timesteps=z["init_timesteps"],
        )


def _lift_stage(bundle: SceneBundle, config: PipelineConfig, cache_dir) -> ControlPointCloud:
    key = hashlib.sha256(
        (
            bundle_digest(bundle)
            + json.dumps(dataclasses.asdict(config.lift), sort_keys=True)
            + f"multi={config.multi_frame}"
        ).encode()
    ).hexdigest()
    path = _cache_path(cache_dir, "controls", key)
    if path is not None and path.exists():
        return _controls_from_cache(path)
    clouds = [lift_tracks(bundle, config.lift)]
    if config.multi_frame:
        for ts in bundle.extra_track_sets:
            clouds.append(
                lift_track_set(bundle, ts.tracks, ts.visibility, ts.init_timestep, config.lift)
            )
    controls = clouds[0] if len(clouds) == 1 else merge_track_sets(clouds)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez(
            path,
            positions=controls.positions,
            visibility=controls.visibility,
            alive=controls.alive,
            init_timestep=np.int64(controls.init_timestep),
            pixels=controls.pixels,
            cam_depths=controls.cam_depths,
            init_timesteps=controls.init_timesteps,
        )
    return controls


def build(
    bundle: SceneBundle,
    config: PipelineConfig | None = None,
    out_dir: str | os.PathLike | None = None,
    cache_dir: str | os.PathLike | None = None,
) -> Scene4D:
    """Run lift -> densify -> semantics and assemble the queryable scene."""
    config = config or PipelineConfig()
    T = bundle.manifest.num_timesteps

    with _stage("lift"):
        controls = _lift_stage(bundle, config, cache_dir)

    with _stage("densify"):
        mask = None
        if config.lift.enable_gradient_filter:
            mask = depth_gradient_mask(
                bundle.depths[controls.init_timestep], config.lift.gradient_percentile
            )
        assignments = assign_pixels(bundle, controls, mask, config.densify)
        dense = attach_semantics(densify(assignments, controls), bundle.masks)

    with _stage("semantics"):
        seeds = config.seed_frames
        if seeds is None:
            seeds = tuple(sorted({0, T // 2, T - 1}))
        merge_cfg = MergeConfig(
            seed_frames=tuple(seeds),
            t_ref=config.t_ref if config.t_ref is not None else T // 2,
            radius=config.radius,
            tau=config.tau,
            min_component_pixels=config.min_component_pixels,
            connectivity=config.connectivity,
            presence_fraction=config.presence_fraction,
        )
        instances = build_instances(bundle.masks, dense, controls, merge_cfg)

    scene = Scene4D(
        manifest=bundle.manifest,
        camera=bundle.camera,
        controls=controls,
        dense=dense,
        instances=instances,
    )
    if out_dir is not None:
        persist(scene, out_dir, config)
    return scene


def build_from_manifest(
    manifest_path: str | os.PathLike,
    config: PipelineConfig | None = None,
    out_dir: str | os.PathLike | None = None,
    cache_dir: str | os.PathLike | None = None,
) -> Scene4D:
    return build(load_scene(manifest_path), config, out_dir, cache_dir)


# ---------------------------------------------------------------------------
# persistence


def persist(scene: Scene4D, out_dir: str | os.PathLike, config: PipelineConfig | None = None) -> Path:
    """Write a built scene to out_dir; byte-identical for identical scenes.

    Contributor pixel sets are stored in one shared blob; their per-frame
    member attachments are provenance only and are not round-tripped.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    m = scene.manifest
    c = scene.controls
    d = scene.dense

    contrib_pixels = [fi.pixels for inst in scene.instances.instances for fi in inst.contributors]
    contrib_blob = (
        np.concatenate(contrib_pixels, axis=0)
        if contrib_pixels
        else np.zeros((0, 2), dtype=np.int64)
    )

    rows = []
    offset = 0
    for inst in scene.instances.instances:
        contribs = []
        for fi in inst.contributors:
            contribs.append(
                {
                    "seed_frame": fi.seed_frame,
                    "class_id": fi.class_id,
                    "pixel_range": [offset, offset + fi.pixels.shape[0]],
                }
            )
            offset += fi.pixels.shape[0]
        rows.append(
            {
                "instance_id": inst.instance_id,
                "class_id": inst.class_id,
                "member_ids": inst.member_ids.tolist(),
                "presence": inst.presence.astype(np.uint8).tolist(),
                "contributors": contribs,
            }
        )

    doc = {
        "format": FORMAT,
        "fingerprint": config.fingerprint() if config is not None else None,
        "config": config.to_dict() if config is not None else None,
        "manifest": {
            "scene_id": m.scene_id,
            "num_timesteps": m.num_timesteps,
            "frame_stride": m.frame_stride,
            "fps": m.fps,
            "width": m.width,
            "height": m.height,
            "depth_units": m.depth_units,
            "track_init_timestep": m.track_init_timestep,
            "class_names": {str(k): v for k, v in sorted(m.class_names.items())},
            "frames_dir": m.frames_dir,
            "frame_pattern": m.frame_pattern,
        },
        "camera": {
            "fx": scene.camera.fx,
            "fy": scene.camera.fy,
            "cx": scene.camera.cx,
            "cy": scene.camera.cy,
            "poses": write_blob(out, "camera_poses.bin", scene.camera.poses),
        },
        "controls": {
            "init_timestep": c.init_timestep,
            "positions": write_blob(out, "controls_positions.bin", c.positions),
            "visibility": write_blob(out, "controls_visibility.bin", c.visibility.astype(np.uint8)),
            "alive": write_blob(out, "controls_alive.bin", c.alive.astype(np.uint8)),
            "pixels": write_blob(out, "controls_pixels.bin", c.pixels),
            "cam_depths": write_blob(out, "controls_cam_depths.bin", c.cam_depths),
            "init_timesteps": write_blob(out, "controls_init_timesteps.bin", c.init_timesteps),
        },
        "dense": {
            "t_obs": write_blob(out, "dense_t_obs.bin", d.t_obs),
            "pixels": write_blob(out, "dense_pixels.bin", d.pixels),
            "positions": write_blob(out, "dense_positions.bin", d.positions),
            "neighbors": write_blob(out, "dense_neighbors.bin", d.neighbors),
            "weights": write_blob(out, "dense_weights.bin", d.weights),
            "class_ids": write_blob(out, "dense_class_ids.bin", d.class_ids.astype(np.int64)),
        },
        "instances": {
            "t_ref": scene.instances.t_ref,
            "radius": scene.instances.radius,
            "tau": scene.instances.tau,
            "contributor_pixels": write_blob(
                out, "contributor_pixels.bin", contrib_blob.astype(np.int64)
            ),
            "rows": rows,
        },
    }
    path = out / "scene.json"
    dump_json(path, doc)
    return path


def load_built(build_dir: str | os.PathLike) -> Scene4D:
    """Inverse of persist."""
    base = Path(build_dir)
    doc = load_json(base / "scene.json", field="scene")
    if doc.get("format") != FORMAT:
        raise Scene4DError(f"unsupported build format {doc.get('format')!r}")

    md = doc["manifest"]
    manifest = SceneManifest(
        scene_id=md["scene_id"],
        num_timesteps=md["num_timesteps"],
        frame_stride=md["frame_stride"],
        fps=md["fps"],
        width=md["width"],
        height=md["height"],
        depth_units=md["depth_units"],
        track_init_timestep=md["track_init_timestep"],
        class_names={int(k): v for k, v in md["class_names"].items()},
        frames_dir=md["frames_dir"],
        frame_pattern=md["frame_pattern"],
    )
    cd = doc["camera"]
    camera = CameraModel(
        fx=cd["fx"],
        fy=cd["fy"],
        cx=cd["cx"],
        cy=cd["cy"],
        poses=read_blob(base, "camera.poses", cd["poses"]),
    )
    cc = doc["controls"]
    controls = ControlPointCloud(
        positions=read_blob(base, "controls.positions", cc["positions"]),
        visibility=read_blob(base, "controls.visibility", cc["visibility"]).astype(bool),
        alive=read_blob(base, "controls.alive", cc["alive"]).astype(bool),
        init_timestep=cc["init_timestep"],
        pixels=read_blob(base, "controls.pixels", cc["pixels"]),
        cam_depths=read_blob(base, "controls.cam_depths", cc["cam_depths"]),
        init_timesteps=read_blob(base, "controls.init_timesteps", cc["init_timesteps"]),
    )
    dd = doc["dense"]
    dense = DensePointCloud(
        t_obs=read_blob(base, "dense.t_obs", dd["t_obs"]),
        pixels=read_blob(base, "dense.pixels", dd["pixels"]),
        positions=read_blob(base, "dense.positions", dd["positions"]),
        neighbors=read_blob(base, "dense.neighbors", dd["neighbors"]),
        weights=read_blob(base, "dense.weights", dd["weights"]),
        class_ids=read_blob(base, "dense.class_ids", dd["class_ids"]),
    )
    idoc = doc["instances"]
    contrib_blob = read_blob(base, "instances.contributor_pixels", idoc["contributor_pixels"])
    instances = []
    for row in idoc["rows"]:
        contribs = tuple(
            FrameInstance(
                seed_frame=cr["seed_frame"],
                class_id=cr["class_id"],
                pixels=contrib_blob[cr["pixel_range"][0] : cr["pixel_range"][1]],
            )
            for cr in row["contributors"]
        )
        instances.append(
            PersistentInstance(
                instance_id=row["instance_id"],
                class_id=row["class_id"],
                member_ids=np.asarray(row["member_ids"], dtype=np.int64),
                contributors=contribs,
                presence=np.asarray(row["presence"], dtype=np.uint8).astype(bool),
            )
        )
    table = InstanceTable(
        instances=tuple(instances),
        t_ref=idoc["t_ref"],
        radius=idoc["radius"],
        tau=idoc["tau"],
    )
    return Scene4D(
        manifest=manifest, camera=camera, controls=controls, dense=dense, instances=table
    )


def read_build_meta(build_dir: str | os.PathLike) -> dict:
    """Config and fingerprint recorded with a persisted scene."""
    doc = load_json(Path(build_dir) / "scene.json", field="scene")
    return {"fingerprint": doc.get("fingerprint"), "config": doc.get("config")}
