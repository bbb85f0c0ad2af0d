"""Synthetic fixture generation: recipe validation, render oracles, truth files."""

import dataclasses
import json

import numpy as np
import pytest
from PIL import Image

from scene4d import fixtures as fx
from scene4d.errors import RecipeInvalid, UnknownInstance
from scene4d.scene_io import load_scene, validate_bundle
from scene4d.fixtures import (
    FixtureTruth,
    JumperSpec,
    PlateSpec,
    SceneRecipe,
    generate_fixture,
    make_queries,
    preset,
    resolve_instance,
    validate_recipe,
    write_fixture,
)

# ---------------------------------------------------------------- validation


def plate(name="p", z=1.0, x=0.0, y=0.0, size=(0.3, 0.3), waypoints=None, **kw):
    if waypoints is None:
        waypoints = ((0, (x, y, z)),)
    return PlateSpec(name=name, class_id=2, size=size, waypoints=waypoints, **kw)


@pytest.mark.parametrize(
    "overrides,fragment",
    [
        (dict(width=16), "too small"),
        (dict(num_timesteps=1), "num_timesteps must be >= 2"),
        (dict(focal=0.0), "focal must be positive"),
        (dict(bg_z=-1.0), "bg_z must be positive"),
        (dict(frame_stride=0), "bad frame_stride or fps"),
        (dict(fps=0.0), "bad frame_stride or fps"),
        (dict(bg_region=(0, 0, 200, 128)), "outside 160x128 image"),
        (dict(init_timestep=99), "init_timestep 99 outside"),
        (dict(plates=(plate(), plate())), "duplicate plate name 'p'"),
        (dict(plates=(plate(size=(0.0, 0.3)),)), "non-positive geometry"),
        (
            dict(plates=(plate(waypoints=((5, (0, 0, 1)), (5, (0, 0, 1)))),)),
            "strictly increasing",
        ),
        (dict(plates=(plate(waypoints=((0, (0, 0, 1)), (50, (0, 0, 1)))),)), "outside [0, 20)"),
        (dict(plates=(plate(z=-0.5),)), "behind camera at t=0"),
        (dict(plates=(plate(x=5.0),)), "leaves the image"),
        (dict(plates=(plate("a"), plate("b", x=0.1)),), "overlap at equal depth"),
        (dict(jumper=JumperSpec((500, 4), (5, 5))), "jumper pixel (500, 4) outside"),
        (dict(contact_pair=("a", "ghost"), plates=(plate("a"),)), "names unknown plates"),
    ],
)
def test_validate_recipe_rejections(overrides, fragment):
    recipe = SceneRecipe(scene_id="bad", **overrides)
    with pytest.raises(RecipeInvalid) as err:
        validate_recipe(recipe)
    assert fragment in str(err.value)


def test_validate_recipe_joins_multiple_problems():
    recipe = SceneRecipe(scene_id="bad", focal=-1.0, num_timesteps=1)
    with pytest.raises(RecipeInvalid) as err:
        validate_recipe(recipe)
    assert "; " in str(err.value)


def test_unknown_preset():
    with pytest.raises(RecipeInvalid, match="unknown preset 'warp'"):
        preset("warp")


def test_preset_overrides_are_revalidated():
    with pytest.raises(RecipeInvalid):
        preset("rigid", num_timesteps=1)
    assert preset("rigid", fps=30.0).fps == 30.0


@pytest.mark.parametrize("name", fx.PRESETS)
def test_presets_render_valid_bundles(name):
    bundle, truth = generate_fixture(preset(name))
    report = validate_bundle(bundle)
    assert report.ok, report.violations
    assert truth.scene_id == name
    assert bundle.manifest.num_timesteps == truth.num_timesteps


# ---------------------------------------------------------------- render oracles


def test_masks_match_winner_at_oracle(contact):
    bundle, truth, _ = contact
    lut = {None: 0}
    for j, obj in enumerate(truth.objects):
        lut[j] = obj.class_id
    for t in (0, 7, 14, 19):
        for v in range(1, truth.height, 7):
            for u in range(1, truth.width, 7):
                want = lut[truth.winner_at(u, v, t)]
                assert bundle.masks[t, v, u] == want, (t, u, v)


def test_depths_match_frontmost_plate(contact):
    bundle, truth, _ = contact
    t = truth.contact["t_contact"]
    anvil = truth.object_named("anvil")
    c = anvil.centers[t]
    u = int(round(truth.focal * c[0] / c[2] + (truth.width - 1) / 2))
    v = int(round(truth.focal * c[1] / c[2] + (truth.height - 1) / 2))
    assert bundle.masks[t, v, u] == anvil.class_id
    assert bundle.depths[t, v, u] == np.float32(c[2])
    # background pixel keeps the plane depth
    assert bundle.depths[t, 1, 1] == np.float32(2.0)


def test_occlusion_visibility_matches_box_cover_oracle(occlusion):
    bundle, truth = occlusion
    recipe = preset("occlusion")
    box = recipe.plates[0]
    bg = truth.objects[0]
    s0, s1 = bg.track_slice
    for t in range(recipe.num_timesteps):
        u0, v0, u1, v1 = fx._rect_px(recipe, box, t)
        for i in range(s0, s1):
            u, v = bundle.tracks[i, t]
            covered = u0 <= u <= u1 and v0 <= v <= v1
            assert bundle.visibility[i, t] == (not covered), (i, t)


def test_rigid_scene_is_fully_visible(rigid):
    bundle, truth, _ = rigid
    assert bundle.visibility.all()


def test_plate_tracks_project_from_world_truth(rigid):
    bundle, truth, _ = rigid
    mover = truth.object_named("mover")
    s0, s1 = mover.track_slice
    for t in (0, 9, 19):
        world = mover.world_points(t)
        u = truth.focal * world[:, 0] / world[:, 2] + (truth.width - 1) / 2
        v = truth.focal * world[:, 1] / world[:, 2] + (truth.height - 1) / 2
        np.testing.assert_allclose(bundle.tracks[s0:s1, t, 0], u, atol=1e-4)
        np.testing.assert_allclose(bundle.tracks[s0:s1, t, 1], v, atol=1e-4)
    # background tracks are static
    b0, b1 = truth.objects[0].track_slice
    assert (bundle.tracks[b0:b1] == bundle.tracks[b0:b1, :1]).all()


def test_object_truth_displacement(rigid):
    _, truth, _ = rigid
    mover = truth.object_named("mover")
    np.testing.assert_allclose(mover.displacement(0, 19), [-0.19, 0.22, 0.0], atol=1e-12)
    with pytest.raises(KeyError):
        truth.object_named("ghost")


def test_jumper_track_stays_visible(jumper):
    bundle, truth = jumper
    assert truth.jumper_index is not None
    assert bundle.visibility[truth.jumper_index].all()
    jp = bundle.tracks[truth.jumper_index]
    assert tuple(jp[0]) == (120.0, 64.0) and tuple(jp[1]) == (50.0, 64.0)
    assert (jp[::2] == jp[0]).all() and (jp[1::2] == jp[1]).all()


# ---------------------------------------------------------------- contact truth


def test_contact_truth_against_closed_form(contact):
    _, truth, _ = contact
    ct = truth.contact
    assert ct["a"] == "anvil" and ct["b"] == "pusher"
    assert ct["t_contact"] == 14 and ct["pit"] == 14
    assert ct["span"] == [0, 14]
    assert ct["direction"] == [-1, 0, 0]
    assert ct["intervals"] == [[12, 15]]
    assert ct["point"] == pytest.approx([0.0, 0.0, 1.6], abs=1e-12)

    # stride-4 interior columns at the observation frame (t=10): the anvil
    # covers pixels 35..79, the pusher 89..133, so the nearest flat stride
    # columns are u=76 and u=92
    f, z = 160.0 - 40.0, 1.6  # focal 120, shared plate depth
    f = 120.0
    a = 10.0 / 14.0
    xb10 = (1.0 - a) * 0.7 + a * 0.3
    xa_local = (76 - 79.5) * z / f - (-0.3)
    xb_local = (92 - 79.5) * z / f - xb10
    c_dense = xb_local - xa_local + 0.6
    assert ct["c_dense"] == pytest.approx(c_dense, rel=1e-9)

    step = 0.4 / 14.0  # median per-step speed of the pusher
    assert ct["threshold"] == pytest.approx(c_dense + 2.5 * step, rel=1e-9)

    dist = np.asarray(ct["dist_series"])
    assert len(dist) == truth.num_timesteps
    assert dist[14] == pytest.approx(c_dense, rel=1e-9)
    gap = np.array([0.4 * (1 - t / 14.0) if t <= 14 else 0.04 * (t - 14) for t in range(20)])
    np.testing.assert_allclose(dist, np.maximum(gap, 0.0) + c_dense, atol=1e-9)


def test_contact_pair_without_interior_pixels_is_rejected():
    # plates too small for any flat stride-grid pixel at init
    z = 1.6
    tiny = dict(size=(0.02, 0.02), track_step=0.01, track_inset=0.0)
    recipe = SceneRecipe(
        scene_id="s",
        plates=(
            plate("a", z=z, x=-0.4, **tiny),
            plate("b", z=z, x=0.4, **tiny),
        ),
        contact_pair=("a", "b"),
    )
    with pytest.raises(RecipeInvalid, match="no interior stride pixels"):
        generate_fixture(recipe)


# ---------------------------------------------------------------- persistence


def test_write_fixture_round_trip(tmp_path):
    recipe = preset("separated")
    manifest_path, truth_path = write_fixture(recipe, tmp_path / "sep")
    loaded = load_scene(manifest_path)
    bundle, truth = generate_fixture(recipe)
    np.testing.assert_array_equal(loaded.depths, bundle.depths)
    np.testing.assert_array_equal(loaded.tracks, bundle.tracks)
    np.testing.assert_array_equal(loaded.visibility, bundle.visibility)
    np.testing.assert_array_equal(loaded.masks, bundle.masks)
    again = FixtureTruth.load(truth_path)
    assert again.to_dict() == truth.to_dict()


def test_truth_json_is_plain_data(tmp_path):
    _, truth = generate_fixture(preset("jumper"))
    path = truth.save(tmp_path / "truth.json")
    doc = json.loads(path.read_text())
    assert doc["jumper_index"] == truth.jumper_index
    assert isinstance(doc["objects"][1]["centers"][0][0], float)


def test_emit_frames_writes_strided_pngs(tmp_path):
    recipe = preset("jumper", emit_frames=True)
    manifest_path, _ = write_fixture(recipe, tmp_path / "jmp")
    bundle = load_scene(manifest_path)
    assert bundle.manifest.frames_dir is not None
    frames = sorted(p.name for p in (tmp_path / "jmp" / "frames").iterdir())
    assert len(frames) == 20
    assert frames[0] == "frame_00000.png" and frames[1] == "frame_00004.png"
    img = Image.open(tmp_path / "jmp" / "frames" / frames[0])
    assert img.size == (160, 128) and img.mode == "L"


def test_multi_seed_adds_extra_track_sets():
    bundle, _ = generate_fixture(preset("rigid", multi_seed=True))
    assert len(bundle.extra_track_sets) == 2
    assert bundle.extra_track_sets[0].init_timestep == 0
    assert bundle.extra_track_sets[1].init_timestep == 19
    np.testing.assert_array_equal(bundle.extra_track_sets[0].tracks, bundle.tracks)


# ---------------------------------------------------------------- queries


def test_make_queries_matches_contact_truth(contact):
    _, truth, scene = contact
    queries = make_queries(scene, truth)
    assert [q.query_type for q in queries] == [
        "spatial",
        "temporal_pit",
        "temporal_interval",
        "directional",
    ]
    assert all(q.scene_id == "contact" for q in queries)

    spatial = queries[0]
    assert "come into contact at t=14?" in spatial.query
    assert spatial.t == 14
    # contact point (0, 0, 1.6) projects onto the image center
    assert spatial.gt_pixel == pytest.approx((79.5, 63.5), abs=1e-9)

    assert queries[1].gt_timestep == 14
    assert "closest to each other?" in queries[1].query

    assert queries[2].gt_intervals == ((12, 15),)
    assert f"within {truth.contact['threshold']:.4f} meters" in queries[2].query

    assert queries[3].gt_direction == (-1, 0, 0)
    assert "from t=0 to t=14?" in queries[3].query


def test_make_queries_needs_contact_truth(rigid):
    _, truth, scene = rigid
    with pytest.raises(RecipeInvalid, match="contact fixture"):
        make_queries(scene, truth)


def test_resolve_instance(contact):
    _, truth, scene = contact
    anvil = truth.object_named("anvil")
    t_ref = scene.instances.t_ref
    inst = resolve_instance(scene, anvil.class_id, anvil.centers[t_ref])
    assert scene.instances.get(inst).class_id == anvil.class_id
    with pytest.raises(UnknownInstance):
        resolve_instance(scene, 99, np.zeros(3))
