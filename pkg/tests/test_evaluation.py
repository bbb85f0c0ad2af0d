"""Grounding metrics and benchmark aggregation.

Every numeric expectation is computed by hand or by an independent
formula inside the test, including the parse-failure fallbacks.
"""

from dataclasses import dataclass
from typing import Any

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_tiny_scene
from scene4d.errors import AllAxesMasked, MissingScene
from scene4d.evaluation import (
    CATEGORIES,
    DIRECTION_FAILURE_ERROR,
    BenchmarkReport,
    ParseFailure,
    QueryFixture,
    QueryResult,
    direction_error,
    interval_iou,
    load_fixtures,
    pit_error,
    run_benchmark,
    save_fixtures,
    score_answer,
    spatial_error,
)
from scene4d.scene_io import CameraModel, identity_poses


def make_camera():
    return CameraModel(fx=100.0, fy=100.0, cx=31.5, cy=23.5, poses=identity_poses(4))


def test_spatial_error_2d_passthrough():
    cam = make_camera()
    err = spatial_error([13.0, 10.0], (10.0, 6.0), cam, 0, 64, 48)
    assert err == 5.0  # 3-4-5 triangle


def test_spatial_error_projects_3d():
    cam = make_camera()
    # world point that projects to (31.5 + 100*0.1/2, 23.5) = (36.5, 23.5)
    err = spatial_error([0.1, 0.0, 2.0], (36.5, 23.5), cam, 0, 64, 48)
    assert err == pytest.approx(0.0, abs=1e-12)
    off = spatial_error([0.1, 0.0, 2.0], (36.5, 26.5), cam, 0, 64, 48)
    assert off == pytest.approx(3.0, abs=1e-12)


def test_spatial_error_fallbacks_score_diagonal():
    cam = make_camera()
    diagonal = float(np.hypot(64, 48))
    assert spatial_error(ParseFailure("x"), (1, 1), cam, 0, 64, 48) == diagonal
    assert spatial_error([0.0, 0.0, -2.0], (1, 1), cam, 0, 64, 48) == diagonal  # behind camera
    assert spatial_error([1.0, 2.0, 3.0, 4.0], (1, 1), cam, 0, 64, 48) == diagonal  # wrong arity


def test_pit_error():
    assert pit_error(7, 14, 24) == 7.0
    assert pit_error(14, 14, 24) == 0.0
    assert pit_error(ParseFailure(""), 3, 24) == 24.0


def test_interval_iou_hand_cases():
    # [2,5] vs [4,7]: sets {2..5}, {4..7}; overlap {4,5}; union {2..7}
    assert interval_iou([[2, 5]], [[4, 7]]) == pytest.approx(2 / 6, abs=1e-15)
    assert interval_iou([[0, 3]], [[0, 3]]) == 1.0
    assert interval_iou([[0, 1]], [[5, 6]]) == 0.0
    # multiple ground-truth segments union together
    assert interval_iou([[0, 5]], [[0, 1], [4, 5]]) == pytest.approx(4 / 6, abs=1e-15)


def test_interval_iou_normalizes_reversed_pairs():
    assert interval_iou([[5, 2]], [[2, 5]]) == 1.0
    assert interval_iou([[2, 5]], [[5, 2]]) == 1.0


def test_interval_iou_fallbacks_and_validation():
    assert interval_iou(ParseFailure(""), [[2, 5]]) == 0.0
    assert interval_iou([], [[2, 5]]) == 0.0
    with pytest.raises(ValueError):
        interval_iou([[2, 5]], [])


def test_direction_error_masks_zero_axes():
    assert direction_error([1, 0, 0], [1, 0, 0]) == 0.0
    assert direction_error([-1, 0, 0], [1, 0, 0]) == 2.0
    # y axis has gt 0: ignored no matter the prediction
    assert direction_error([1, -1, 0], [1, 0, 0]) == 0.0
    assert direction_error([1, 1, -1], [1, 0, 1]) == 1.0  # errors 0 and 2 averaged
    assert direction_error(ParseFailure(""), [1, 0, 0]) == DIRECTION_FAILURE_ERROR
    with pytest.raises(AllAxesMasked):
        direction_error([1, 0, 0], [0, 0, 0])


@settings(deadline=None, max_examples=200)
@given(
    pred=st.tuples(*[st.integers(-1, 1)] * 3),
    gt=st.tuples(*[st.integers(-1, 1)] * 3),
    noise=st.tuples(*[st.integers(-3, 3)] * 3),
)
def test_direction_error_invariant_to_masked_axes(pred, gt, noise):
    if all(g == 0 for g in gt):
        return
    base = direction_error(pred, gt)
    # perturbing the prediction on masked axes never changes the score
    perturbed = tuple(p + n if g == 0 else p for p, g, n in zip(pred, gt, noise))
    assert direction_error(perturbed, gt) == base
    # and the score equals the hand formula on active axes
    active = [(p, g) for p, g in zip(pred, gt) if g != 0]
    expected = sum(abs(p - g) for p, g in active) / len(active)
    assert base == pytest.approx(expected, abs=1e-15)


def test_query_fixture_validation():
    with pytest.raises(ValueError, match="unknown query type"):
        QueryFixture("s", "q", "relational")
    with pytest.raises(ValueError, match="missing ground truth"):
        QueryFixture("s", "q", "spatial", gt_pixel=(1, 2))  # no projection t
    with pytest.raises(ValueError, match="missing ground truth"):
        QueryFixture("s", "q", "temporal_interval", gt_intervals=())
    QueryFixture("s", "q", "temporal_pit", gt_timestep=0)  # minimal valid


def test_fixture_round_trip(tmp_path):
    fixtures = [
        QueryFixture("a", "where", "spatial", gt_pixel=(3.5, 4.0), t=2),
        QueryFixture("a", "when", "temporal_pit", gt_timestep=5),
        QueryFixture("b", "during", "temporal_interval", gt_intervals=((1, 4), (6, 6))),
        QueryFixture("b", "which way", "directional", gt_direction=(-1, 0, 1)),
    ]
    path = save_fixtures(fixtures, tmp_path / "q.jsonl")
    assert load_fixtures(path) == fixtures
    # blank lines are tolerated
    path.write_text(path.read_text() + "\n\n")
    assert load_fixtures(path) == fixtures


def test_score_answer_clamps_pit_predictions():
    scene = make_tiny_scene()  # T=4
    fx = QueryFixture("tiny", "when", "temporal_pit", gt_timestep=3)
    assert score_answer(fx, 99, scene) == 0.0  # clamped to 3
    assert score_answer(fx, -5, scene) == 3.0  # clamped to 0
    assert score_answer(fx, ParseFailure(""), scene) == 4.0


def test_score_answer_routes_categories():
    scene = make_tiny_scene()
    sp = QueryFixture("tiny", "q", "spatial", gt_pixel=(31.5, 31.5), t=0)
    assert score_answer(sp, [0.0, 0.0, 1.0], scene) == pytest.approx(0.0, abs=1e-12)
    iv = QueryFixture("tiny", "q", "temporal_interval", gt_intervals=((0, 1),))
    assert score_answer(iv, [[0, 1]], scene) == 1.0
    dr = QueryFixture("tiny", "q", "directional", gt_direction=(1, 0, 0))
    assert score_answer(dr, [1, 0, 0], scene) == 0.0


@dataclass
class StubAnswer:
    prediction: Any
    parse_ok: bool = True
    num_tool_calls: int = 2
    failure_reason: str = ""


def test_run_benchmark_aggregates_and_flags_failures():
    scene = make_tiny_scene()
    fixtures = [
        QueryFixture("tiny", "q1", "temporal_pit", gt_timestep=1),
        QueryFixture("tiny", "q2", "temporal_pit", gt_timestep=1),
        QueryFixture("tiny", "q3", "directional", gt_direction=(1, 0, 0)),
    ]
    answers = {
        "q1": StubAnswer(prediction=1),
        "q2": StubAnswer(prediction=None, parse_ok=False, failure_reason="no json"),
        "q3": StubAnswer(prediction=(1, 0, 0)),
    }
    report = run_benchmark(fixtures, lambda f: answers[f.query], {"tiny": scene}, "fp123")
    assert report.fingerprint == "fp123"
    assert report.parse_failures == 1
    stats = report.category_stats()
    # pit errors: 0 (exact) and 4 (T fallback for the parse failure)
    assert stats["temporal_pit"]["mean"] == 2.0
    assert stats["temporal_pit"]["std"] == pytest.approx(np.std([0.0, 4.0], ddof=1))
    assert stats["temporal_pit"]["count"] == 2
    assert stats["directional"] == {"mean": 0.0, "std": 0.0, "count": 1}
    assert "spatial" not in stats
    assert any("clamped" in n for n in report.notes)

    d = report.to_dict()
    assert d["num_queries"] == 3 and d["parse_failures"] == 1
    assert [r["parse_ok"] for r in d["rows"]] == [True, False, True]

    text = report.to_text()
    assert "Temporal PIT (steps)" in text
    assert "parse failures: 1/3" in text
    assert "config: fp123" in text
    assert "Spatial" not in text  # absent categories are omitted


def test_run_benchmark_rejects_unknown_scene():
    fx = QueryFixture("ghost", "q", "temporal_pit", gt_timestep=0)
    with pytest.raises(MissingScene):
        run_benchmark([fx], lambda f: StubAnswer(0), {}, "")


def test_benchmark_report_category_order_and_empty():
    report = BenchmarkReport()
    assert report.category_stats() == {}
    assert report.parse_failures == 0
    assert "parse failures: 0/0" in report.to_text()
    for cat in CATEGORIES:
        report.rows.append(QueryResult("s", cat, 1.0, True))
    text = report.to_text()
    order = [text.index(lbl) for lbl in
             ("Spatial (px)", "Temporal PIT (steps)", "Temporal Interval (IoU)", "Directional (L1)")]
    assert order == sorted(order)
