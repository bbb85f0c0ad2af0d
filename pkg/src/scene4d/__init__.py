"""Queryable 4D scene representations built from monocular video derivatives.

The pipeline lifts 2D point tracks into a persistent world-space control
cloud, densifies it by interpolating per-pixel displacements, attaches
instance identity that survives occlusion, and exposes the result through
a small tool vocabulary that language-model agents can call over HTTP.

Typical use:

    from scene4d import build_from_manifest, PipelineConfig
    scene = build_from_manifest("manifest.json", out_dir="build")
"""

from .densification import DensifyConfig, assign_pixels, attach_semantics, densify, export_ply
from .errors import Scene4DError
from .evaluation import (
    BenchmarkReport,
    QueryFixture,
    load_fixtures,
    run_benchmark,
    save_fixtures,
    score_answer,
)
from .lifting import ControlPointCloud, LiftConfig, lift_tracks
from .pipeline import (
    ABLATIONS,
    PipelineConfig,
    ablation_config,
    build,
    build_from_manifest,
    load_built,
    persist,
)
from .scene_io import SceneBundle, SceneManifest, load_scene, validate_bundle, write_bundle
from .semantics import MergeConfig, build_instances
from .toolkit import Scene4D, scene_summary

__version__ = "0.1.0"

__all__ = [
    "ABLATIONS",
    "BenchmarkReport",
    "ControlPointCloud",
    "DensifyConfig",
    "LiftConfig",
    "MergeConfig",
    "PipelineConfig",
    "QueryFixture",
    "Scene4D",
    "Scene4DError",
    "SceneBundle",
    "SceneManifest",
    "ablation_config",
    "assign_pixels",
    "attach_semantics",
    "build",
    "build_from_manifest",
    "build_instances",
    "densify",
    "export_ply",
    "lift_tracks",
    "load_built",
    "load_fixtures",
    "load_scene",
    "persist",
    "run_benchmark",
    "save_fixtures",
    "scene_summary",
    "score_answer",
    "validate_bundle",
    "write_bundle",
    "__version__",
]
