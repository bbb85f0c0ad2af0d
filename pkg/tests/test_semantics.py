"""Instance extraction and merging, checked against flood-fill, brute
containment, and transitive-closure oracles."""

from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from scene4d.densification import DensePointCloud
from scene4d.errors import EmptyMembership, EmptySet, NoAliveControls, UnknownInstance
from scene4d.lifting import ControlPointCloud
from scene4d.semantics import (
    FrameInstance,
    InstanceTable,
    MergeConfig,
    UnionFind,
    attach_members,
    build_instances,
    components_at,
    connected_components,
    containment_score,
    lift_to_ref,
    merge_instances,
    presence_over_time,
    resolve_radius,
)


def flood_components(mask, connectivity):
    """BFS flood fill; returns {(class_id, frozenset of (u, v))}."""
    h, w = mask.shape
    offs = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    if connectivity == 8:
        offs += [(-1, -1), (-1, 1), (1, -1), (1, 1)]
    seen = np.zeros((h, w), dtype=bool)
    out = set()
    for v in range(h):
        for u in range(w):
            if mask[v, u] == 0 or seen[v, u]:
                continue
            cid = int(mask[v, u])
            stack, comp = [(v, u)], []
            seen[v, u] = True
            while stack:
                cv, cu = stack.pop()
                comp.append((cu, cv))
                for dv, du in offs:
                    nv, nu = cv + dv, cu + du
                    if 0 <= nv < h and 0 <= nu < w and not seen[nv, nu] and mask[nv, nu] == cid:
                        seen[nv, nu] = True
                        stack.append((nv, nu))
            out.add((cid, frozenset(comp)))
    return out


def as_sets(instances):
    return {(i.class_id, frozenset(map(tuple, i.pixels))) for i in instances}


def test_components_match_flood_fill_oracle():
    mask = np.array(
        [
            [1, 1, 0, 2, 0],
            [0, 1, 0, 2, 0],
            [1, 0, 0, 0, 1],
            [1, 1, 0, 1, 1],
        ],
        dtype=np.int32,
    )
    for conn in (4, 8):
        got = connected_components(mask, connectivity=conn)
        assert as_sets(got) == flood_components(mask, conn)


def test_components_diagonal_blobs_split_on_4_join_on_8():
    mask = np.zeros((4, 4), dtype=np.int32)
    mask[0, 0] = mask[1, 1] = 1
    assert len(connected_components(mask, connectivity=4)) == 2
    assert len(connected_components(mask, connectivity=8)) == 1


def test_components_ignore_background_and_small():
    mask = np.zeros((3, 4), dtype=np.int32)
    mask[0, 0] = 1
    mask[2, 0] = mask[2, 1] = 1
    assert len(connected_components(mask)) == 2
    kept = connected_components(mask, min_pixels=2)
    assert len(kept) == 1 and kept[0].num_pixels == 2
    assert connected_components(np.zeros((3, 3), dtype=np.int32)) == []


def test_components_ordered_by_class_then_position():
    mask = np.array([[0, 2, 0, 1], [0, 0, 0, 1], [1, 0, 0, 0]], dtype=np.int32)
    got = connected_components(mask)
    assert [i.class_id for i in got] == [1, 1, 2]
    # within class 1, the component whose first row-major pixel is earliest comes first
    assert (3, 0) in {tuple(p) for p in got[0].pixels}
    assert (3, 1) not in {tuple(p) for p in got[1].pixels}


@settings(deadline=None, max_examples=60)
@given(
    mask=hnp.arrays(np.int32, hnp.array_shapes(min_dims=2, max_dims=2, min_side=1, max_side=8),
                    elements=st.integers(0, 2)),
    conn=st.sampled_from([4, 8]),
)
def test_components_property(mask, conn):
    got = connected_components(mask, connectivity=conn)
    assert as_sets(got) == flood_components(mask, conn)
    total = sum(i.num_pixels for i in got)
    assert total == int((mask != 0).sum())


def test_components_at_stamps_seed_frame():
    masks = np.zeros((2, 3, 3), dtype=np.int32)
    masks[1, 1, 1] = 4
    assert components_at(masks, 0) == []
    [inst] = components_at(masks, 1)
    assert inst.seed_frame == 1 and inst.class_id == 4


def make_dense(positions, pixels, t_obs, neighbors=None, class_ids=None):
    pos = np.asarray(positions, dtype=np.float64)
    m = pos.shape[0]
    if neighbors is None:
        neighbors = np.zeros((m, 1), dtype=np.int64)
    return DensePointCloud(
        t_obs=np.asarray(t_obs, dtype=np.int64),
        pixels=np.asarray(pixels, dtype=np.int64),
        positions=pos,
        neighbors=np.asarray(neighbors, dtype=np.int64),
        weights=np.ones_like(neighbors, dtype=np.float64),
        class_ids=np.zeros(m, dtype=np.int64) if class_ids is None else np.asarray(class_ids),
    )


def make_controls(n, t, visibility=None):
    pos = np.zeros((n, t, 3))
    vis = np.ones((n, t), dtype=bool) if visibility is None else np.asarray(visibility)
    return ControlPointCloud(
        positions=pos,
        visibility=vis,
        alive=np.ones(n, dtype=bool),
        init_timestep=0,
        pixels=np.zeros((n, t, 2)),
        cam_depths=np.ones((n, t)),
        init_timesteps=np.zeros(n, dtype=np.int64),
    )


def test_attach_members_resolves_pixels_at_seed_frame():
    # dense: ids 0,1 observed at t=0; id 2 at t=1, all on distinct pixels
    dense = make_dense(
        positions=np.zeros((3, 2, 3)),
        pixels=[[1, 1], [2, 1], [1, 1]],
        t_obs=[0, 0, 1],
    )
    insts = [
        FrameInstance(seed_frame=0, class_id=1, pixels=np.array([[2, 1], [1, 1], [0, 0]])),
        FrameInstance(seed_frame=1, class_id=1, pixels=np.array([[1, 1]])),
        FrameInstance(seed_frame=5, class_id=1, pixels=np.array([[1, 1]])),
    ]
    out = attach_members(insts, dense, width=4, height=3)
    assert out[0].member_ids.tolist() == [0, 1]  # sorted, (0,0) has no dense point
    assert out[1].member_ids.tolist() == [2]
    assert out[2].member_ids.size == 0  # no dense points from that frame


def test_lift_to_ref_and_empty_membership():
    dense = make_dense(np.arange(12, dtype=float).reshape(2, 2, 3), [[0, 0], [1, 0]], [0, 0])
    inst = FrameInstance(0, 1, np.array([[0, 0]]), member_ids=np.array([1]))
    np.testing.assert_array_equal(lift_to_ref(inst, dense, 1), dense.positions[[1], 1])
    empty = FrameInstance(0, 1, np.array([[0, 0]]), member_ids=np.empty(0, dtype=np.int64))
    with pytest.raises(EmptyMembership):
        lift_to_ref(empty, dense, 0)
    with pytest.raises(EmptyMembership):
        lift_to_ref(FrameInstance(0, 1, np.array([[0, 0]])), dense, 0)


def brute_containment(a, b, r):
    small, other = (a, b) if len(a) <= len(b) else (b, a)
    d = np.linalg.norm(small[:, None, :] - other[None, :, :], axis=-1)
    return float((d.min(axis=1) <= r).mean())


def test_containment_score_matches_brute_oracle():
    rng = np.random.default_rng(7)
    for _ in range(20):
        a = rng.normal(size=(rng.integers(1, 40), 3))
        b = rng.normal(size=(rng.integers(1, 40), 3))
        r = float(rng.uniform(0.1, 1.5))
        assert containment_score(a, b, r) == pytest.approx(brute_containment(a, b, r), abs=0)
        assert containment_score(a, b, r) == containment_score(b, a, r)


def test_containment_score_boundary_inclusive():
    a = np.array([[0.0, 0.0, 0.0]])
    b = np.array([[0.5, 0.0, 0.0], [3.0, 0.0, 0.0]])
    assert containment_score(a, b, 0.5) == 1.0
    assert containment_score(a, b, 0.499) == 0.0


def test_containment_score_uses_smaller_set():
    a = np.array([[0.0, 0.0, 0.0], [10.0, 0.0, 0.0]])
    b = np.tile(np.array([[0.0, 0.0, 0.0]]), (5, 1)) + np.arange(5)[:, None] * [0.01, 0, 0]
    # smaller set is a: one of two points near b
    assert containment_score(a, b, 0.5) == 0.5


def test_containment_score_empty_raises():
    with pytest.raises(EmptySet):
        containment_score(np.empty((0, 3)), np.ones((2, 3)), 1.0)


def closure_groups(n, edges):
    adj = {i: set() for i in range(n)}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    seen, groups = set(), set()
    for i in range(n):
        if i in seen:
            continue
        stack, comp = [i], set()
        while stack:
            x = stack.pop()
            if x in comp:
                continue
            comp.add(x)
            stack.extend(adj[x] - comp)
        seen |= comp
        groups.add(frozenset(comp))
    return groups


def test_union_find_matches_transitive_closure():
    rng = np.random.default_rng(13)
    for _ in range(50):
        n = int(rng.integers(1, 30))
        m = int(rng.integers(0, 60))
        edges = [tuple(rng.integers(0, n, size=2)) for _ in range(m)]
        uf = UnionFind(n)
        for a, b in edges:
            uf.union(a, b)
        got = {frozenset(g) for g in uf.groups().values()}
        assert got == closure_groups(n, edges)


def test_union_find_root_is_order_independent():
    a = UnionFind(5)
    b = UnionFind(5)
    for x, y in [(0, 1), (3, 4), (1, 3)]:
        a.union(x, y)
    for x, y in [(4, 3), (1, 0), (3, 1)]:
        b.union(x, y)
    assert a.groups() == b.groups()


def test_resolve_radius_matches_brute_spacing():
    rng = np.random.default_rng(21)
    n, t = 40, 3
    pos = np.tile(rng.normal(size=(n, 1, 3)), (1, t, 1))
    controls = replace(make_controls(n, t), positions=pos)
    d = np.linalg.norm(pos[:, 1, None, :] - pos[None, :, 1, :], axis=-1)
    np.fill_diagonal(d, np.inf)
    expected = 2.0 * float(np.median(d.min(axis=1)))
    assert resolve_radius(controls, 1) == pytest.approx(expected, rel=1e-9)


def test_resolve_radius_degenerate_cases():
    one = make_controls(1, 2)
    assert resolve_radius(one, 0) == 1.0
    same = make_controls(5, 2)  # all controls at the origin
    assert resolve_radius(same, 0) == 1.0
    dead = replace(make_controls(3, 2), alive=np.zeros(3, dtype=bool))
    with pytest.raises(NoAliveControls):
        resolve_radius(dead, 0)


def cluster(center, n=4, spread=0.05, seed=0):
    rng = np.random.default_rng(seed)
    return np.asarray(center) + rng.uniform(-spread, spread, size=(n, 3))


def static_dense(points_per_inst):
    """Dense cloud where each listed point set is constant over T=3."""
    pts = np.concatenate(points_per_inst)
    m = pts.shape[0]
    pos = np.tile(pts[:, None, :], (1, 3, 1))
    pixels = np.stack([np.arange(m) % 7, np.arange(m) // 7], axis=-1)
    return make_dense(pos, pixels, np.zeros(m, dtype=np.int64))


def inst(seed_frame, class_id, member_ids):
    ids = np.asarray(member_ids, dtype=np.int64)
    return FrameInstance(seed_frame, class_id, np.zeros((ids.size, 2), dtype=np.int64),
                         member_ids=ids)


def test_merge_joins_cross_frame_overlap():
    a = cluster([0, 0, 2], seed=1)
    dense = static_dense([a, a])  # frame-0 copy and frame-1 copy coincide
    table = merge_instances(
        [inst(0, 1, range(4)), inst(1, 1, range(4, 8))],
        dense,
        MergeConfig(seed_frames=(0, 1), t_ref=2, radius=0.2, tau=0.6),
    )
    assert len(table) == 1
    assert table.instances[0].member_ids.tolist() == list(range(8))
    assert len(table.instances[0].contributors) == 2


def test_merge_skips_same_frame_and_other_class():
    a = cluster([0, 0, 2], seed=2)
    dense = static_dense([a, a, a])
    table = merge_instances(
        [inst(0, 1, range(4)), inst(0, 1, range(4, 8)), inst(1, 2, range(8, 12))],
        dense,
        MergeConfig(seed_frames=(0, 1), t_ref=0, radius=0.5, tau=0.6),
    )
    # perfect overlap, but same seed frame / different class: no merges
    assert len(table) == 3


def test_merge_distant_same_class_instances_stay_apart():
    r = 0.2
    a = cluster([0, 0, 2], seed=3)
    b = cluster([10 * r, 0, 2], seed=4)
    dense = static_dense([a, b])
    table = merge_instances(
        [inst(0, 1, range(4)), inst(1, 1, range(4, 8))],
        dense,
        MergeConfig(seed_frames=(0, 1), t_ref=0, radius=r, tau=0.6),
    )
    assert len(table) == 2
    assert [i.instance_id for i in table.instances] == [0, 1]
    assert table.instances[0].member_ids.tolist() == [0, 1, 2, 3]


def test_merge_tau_boundary_is_inclusive():
    base = np.array([[0.0, 0, 2], [0.1, 0, 2], [0.2, 0, 2], [9.0, 0, 2]])
    other = np.array([[0.0, 0, 2], [0.1, 0, 2], [0.2, 0, 2], [0.3, 0, 2], [0.4, 0, 2]])
    dense = static_dense([base, other])
    score = containment_score(dense.positions[:4, 0], dense.positions[4:, 0], 0.05)
    assert score == 0.75
    pair = [inst(0, 1, range(4)), inst(1, 1, range(4, 9))]
    cfg = MergeConfig(seed_frames=(0, 1), t_ref=0, radius=0.05, tau=0.75)
    assert len(merge_instances(pair, dense, cfg)) == 1
    cfg_above = replace(cfg, tau=0.7501)
    assert len(merge_instances(pair, dense, cfg_above)) == 2


def test_merge_requires_resolved_radius():
    dense = static_dense([cluster([0, 0, 2])])
    with pytest.raises(ValueError, match="radius"):
        merge_instances([inst(0, 1, range(4))], dense,
                        MergeConfig(seed_frames=(0,), t_ref=0, radius=None))


def test_merge_config_validation():
    with pytest.raises(ValueError):
        MergeConfig(seed_frames=(), t_ref=0)
    with pytest.raises(ValueError):
        MergeConfig(seed_frames=(0,), t_ref=-1)
    with pytest.raises(ValueError):
        MergeConfig(seed_frames=(0,), t_ref=0, radius=0.0)
    with pytest.raises(ValueError):
        MergeConfig(seed_frames=(0,), t_ref=0, tau=0.0)
    with pytest.raises(ValueError):
        MergeConfig(seed_frames=(0,), t_ref=0, connectivity=6)


def test_presence_fraction_oracle():
    vis = np.ones((4, 5), dtype=bool)
    vis[:, 1] = False            # everyone hidden at t=1
    vis[0, 2] = vis[1, 2] = vis[2, 2] = False  # 1/4 visible at t=2
    controls = make_controls(4, 5, visibility=vis)
    dense = make_dense(
        np.zeros((2, 5, 3)), [[0, 0], [1, 0]], [0, 0],
        neighbors=np.array([[0, 1], [2, 3]]),
    )
    got = presence_over_time(np.array([0, 1]), dense, controls, fraction=0.2)
    assert got.tolist() == [True, False, True, True, True]
    strict = presence_over_time(np.array([0, 1]), dense, controls, fraction=0.3)
    assert strict.tolist() == [True, False, False, True, True]


def test_instance_table_get():
    table = InstanceTable(instances=(), t_ref=0, radius=1.0, tau=0.6)
    with pytest.raises(UnknownInstance):
        table.get(0)


def test_build_instances_end_to_end():
    t, h, w = 3, 12, 18
    masks = np.zeros((t, h, w), dtype=np.int32)
    for tf in (0, 2):
        masks[tf, 2:5, 2:5] = 1    # object A, static
        masks[tf, 2:5, 12:15] = 1  # object B, same class, far away

    pix_a = [(u, v) for v in range(2, 5) for u in range(2, 5)]
    pix_b = [(u, v) for v in range(2, 5) for u in range(12, 15)]
    pixels, t_obs, positions, neighbors = [], [], [], []
    for tf in (0, 2):
        for u, v in pix_a:
            pixels.append((u, v)); t_obs.append(tf)
            positions.append((u * 0.05, v * 0.05, 2.0)); neighbors.append([0])
        for u, v in pix_b:
            pixels.append((u, v)); t_obs.append(tf)
            positions.append((u * 0.05 + 5.0, v * 0.05, 2.0)); neighbors.append([1])
    pos = np.tile(np.asarray(positions)[:, None, :], (1, t, 1))
    dense = make_dense(pos, pixels, t_obs, neighbors=np.asarray(neighbors))

    vis = np.ones((2, t), dtype=bool)
    vis[0, 1] = False  # object A's control unseen at t=1
    controls = make_controls(2, t, visibility=vis)

    table = build_instances(
        masks, dense, controls,
        MergeConfig(seed_frames=(0, 2), t_ref=1, radius=0.3, tau=0.6),
    )
    assert len(table) == 2
    a, b = table.instances
    assert a.instance_id == 0 and b.instance_id == 1
    assert a.class_id == b.class_id == 1
    # each object unified across its two seed-frame observations
    assert a.member_ids.size == 18 and b.member_ids.size == 18
    assert a.presence.tolist() == [True, False, True]
    assert b.presence.tolist() == [True, True, True]


def test_build_instances_resolves_radius_when_unset():
    masks = np.zeros((2, 4, 4), dtype=np.int32)
    masks[0, 1, 1] = 1
    dense = make_dense(np.zeros((1, 2, 3)), [[1, 1]], [0])
    rng = np.random.default_rng(0)
    controls = replace(
        make_controls(6, 2),
        positions=np.tile(rng.normal(size=(6, 1, 3)), (1, 2, 1)),
    )
    table = build_instances(masks, dense, controls,
                            MergeConfig(seed_frames=(0,), t_ref=0))
    assert table.radius == pytest.approx(resolve_radius(controls, 0))
