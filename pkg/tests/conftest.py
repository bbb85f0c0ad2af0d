"""Shared test scenes.

Synthetic fixtures are deterministic, so session scope is safe; nothing in
the suite mutates a built scene.
"""

import numpy as np
import pytest

from scene4d import fixtures as fx
from scene4d.densification import DensePointCloud
from scene4d.lifting import ControlPointCloud
from scene4d.pipeline import build
from scene4d.scene_io import CameraModel, SceneManifest, identity_poses
from scene4d.semantics import InstanceTable, PersistentInstance
from scene4d.toolkit import Scene4D


@pytest.fixture(scope="session")
def rigid():
    bundle, truth = fx.generate_fixture(fx.preset("rigid"))
    return bundle, truth, build(bundle)


@pytest.fixture(scope="session")
def contact():
    bundle, truth = fx.generate_fixture(fx.preset("contact"))
    return bundle, truth, build(bundle)


@pytest.fixture(scope="session")
def occlusion():
    bundle, truth = fx.generate_fixture(fx.preset("occlusion"))
    return bundle, truth


@pytest.fixture(scope="session")
def jumper():
    bundle, truth = fx.generate_fixture(fx.preset("jumper"))
    return bundle, truth


@pytest.fixture(scope="session")
def separated():
    bundle, truth = fx.generate_fixture(fx.preset("separated"))
    return bundle, truth, build(bundle)


def make_tiny_scene(offset=(2.0, 0.0, 0.0), drift=None):
    """Hand-built two-instance scene with exact dyadic coordinates.

    Instance 1 is instance 0 translated by `offset`. Both move by
    0.25*t in x and 0.5*t in y per timestep (or by `drift` per instance),
    so every float op lands on exact binary fractions: tool outputs have
    zero rounding error and co-moving relative motion is exactly zero.
    """
    t_total = 4
    base = np.array(
        [[0.0, 0.0, 1.0], [0.5, 0.0, 1.0], [0.0, 0.5, 1.0], [0.5, 0.5, 1.0]]
    )
    groups = [base, base + np.asarray(offset)]
    if drift is None:
        drift = [(0.25, 0.5, 0.0), (0.25, 0.5, 0.0)]
    positions = np.empty((8, t_total, 3))
    for g, pts in enumerate(groups):
        step = np.asarray(drift[g])
        for t in range(t_total):
            positions[4 * g : 4 * g + 4, t] = pts + step * t

    dense = DensePointCloud(
        t_obs=np.zeros(8, dtype=np.int64),
        pixels=np.zeros((8, 2), dtype=np.int64),
        positions=positions,
        neighbors=np.zeros((8, 1), dtype=np.int64),
        weights=np.ones((8, 1)),
        class_ids=np.array([1, 1, 1, 1, 2, 2, 2, 2], dtype=np.int64),
    )
    controls = ControlPointCloud(
        positions=positions[:1].copy(),
        visibility=np.ones((1, t_total), dtype=bool),
        alive=np.ones(1, dtype=bool),
        init_timestep=0,
        pixels=np.zeros((1, t_total, 2)),
        cam_depths=np.ones((1, t_total)),
        init_timesteps=np.zeros(1, dtype=np.int64),
    )
    instances = InstanceTable(
        instances=(
            PersistentInstance(0, 1, np.arange(4), (), np.ones(t_total, dtype=bool)),
            PersistentInstance(1, 2, np.arange(4, 8), (), np.ones(t_total, dtype=bool)),
        ),
        t_ref=0,
        radius=0.6,
        tau=0.6,
    )
    manifest = SceneManifest(
        scene_id="tiny",
        num_timesteps=t_total,
        frame_stride=1,
        fps=25.0,
        width=64,
        height=64,
        depth_units="meters",
        track_init_timestep=0,
        class_names={1: "left", 2: "right"},
    )
    camera = CameraModel(fx=60.0, fy=60.0, cx=31.5, cy=31.5, poses=identity_poses(t_total))
    return Scene4D(
        manifest=manifest, camera=camera, controls=controls, dense=dense, instances=instances
    )


@pytest.fixture
def tiny_scene():
    return make_tiny_scene()
