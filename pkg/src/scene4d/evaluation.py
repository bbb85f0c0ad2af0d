"""Grounding metrics, query fixtures, and benchmark reporting.

Four query categories: spatial (screen-space L2 after projecting a 3D
prediction), temporal point-in-time (absolute timestep difference),
temporal interval (IoU over inclusive timestep sets), and directional
(mean L1 over the axes the ground truth marks as relevant). Unparseable
answers take category-specific fallback penalties instead of crashing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .errors import AllAxesMasked, MissingScene
from .lifting import project
from .scene_io import CameraModel

DIRECTION_FAILURE_ERROR = 2.0
CATEGORIES = ("spatial", "temporal_pit", "temporal_interval", "directional")


class ParseFailure:
    """Sentinel prediction for answers that could not be parsed."""

    def __init__(self, reason: str = ""):
        self.reason = reason

    def __repr__(self):
        return f"ParseFailure({self.reason!r})"


def spatial_error(pred, gt_pixel, camera: CameraModel, t: int, width: int, height: int) -> float:
    """Screen-space L2 in pixels. 3D predictions are projected with the
    camera at t; predictions behind the camera or unparseable answers score
    the image diagonal."""
    diagonal = float(np.hypot(width, height))
    if isinstance(pred, ParseFailure):
        return diagonal
    p = np.asarray(pred, dtype=np.float64).ravel()
    if p.shape == (3,):
        uvz = project(p, camera, t)
        if not uvz[2] > 0:
            return diagonal
        uv = uvz[:2]
    elif p.shape == (2,):
        uv = p
    else:
        return diagonal
    g = np.asarray(gt_pixel, dtype=np.float64).ravel()
    return float(np.hypot(uv[0] - g[0], uv[1] - g[1]))


def pit_error(pred, gt: int, num_timesteps: int) -> float:
    """|pred - gt| in timesteps; an unparseable answer costs the scene's
    full timestep count."""
    if isinstance(pred, ParseFailure):
        return float(num_timesteps)
    return float(abs(int(pred) - int(gt)))


def _interval_set(intervals) -> set:
    out: set = set()
    for pair in intervals:
        s, e = int(pair[0]), int(pair[1])
        if e < s:
            s, e = e, s
        out.update(range(s, e + 1))
    return out


def interval_iou(pred, gt) -> float:
    """IoU of inclusive timestep sets; unparseable answers score 0."""
    gt_set = _interval_set(gt)
    if not gt_set:
        raise ValueError("ground-truth interval list must be nonempty")
    if isinstance(pred, ParseFailure):
        return 0.0
    pred_set = _interval_set(pred)
    union = pred_set | gt_set
    if not union:
        return 0.0
    return len(pred_set & gt_set) / len(union)


def direction_error(pred, gt) -> float:
    """Mean |pred - gt| over axes where gt is nonzero (0 marks an axis as
    not considered); unparseable answers take the maximal error of 2."""
    g = np.asarray(gt, dtype=np.int64).ravel()
    active = g != 0
    if not active.any():
        raise AllAxesMasked("ground truth marks all axes as not considered")
    if isinstance(pred, ParseFailure):
        return DIRECTION_FAILURE_ERROR
    p = np.asarray(pred, dtype=np.float64).ravel()
    return float(np.abs(p[active] - g[active]).mean())


@dataclass(frozen=True)
class QueryFixture:
    scene_id: str
    query: str
    query_type: str  # spatial | temporal_pit | temporal_interval | directional
    gt_pixel: Optional[tuple] = None  # (u, v), spatial
    gt_timestep: Optional[int] = None  # temporal_pit
    gt_intervals: Optional[tuple] = None  # ((s, e), ...), temporal_interval
    gt_direction: Optional[tuple] = None  # (dx, dy, dz), directional
    t: Optional[int] = None  # projection timestep for spatial queries

    def __post_init__(self):
        if self.query_type not in CATEGORIES:
            raise ValueError(f"unknown query type {self.query_type!r}")
        needed = {
            "spatial": self.gt_pixel is not None and self.t is not None,
            "temporal_pit": self.gt_timestep is not None,
            "temporal_interval": bool(self.gt_intervals),
            "directional": self.gt_direction is not None,
        }[self.query_type]
        if not needed:
            raise ValueError(f"fixture is missing ground truth for {self.query_type}")

    def to_dict(self) -> dict:
        out: dict[str, Any] = {
            "scene_id": self.scene_id,
            "query": self.query,
            "query_type": self.query_type,
        }
        if self.gt_pixel is not None:
            out["gt_pixel"] = list(self.gt_pixel)
        if self.gt_timestep is not None:
            out["gt_timestep"] = self.gt_timestep
        if self.gt_intervals is not None:
            out["gt_intervals"] = [list(p) for p in self.gt_intervals]
        if self.gt_direction is not None:
            out["gt_direction"] = list(self.gt_direction)
        if self.t is not None:
            out["t"] = self.t
        return out

    @staticmethod
    def from_dict(d: dict) -> "QueryFixture":
        return QueryFixture(
            scene_id=d["scene_id"],
            query=d["query"],
            query_type=d["query_type"],
            gt_pixel=tuple(d["gt_pixel"]) if "gt_pixel" in d else None,
            gt_timestep=d.get("gt_timestep"),
            gt_intervals=tuple(tuple(p) for p in d["gt_intervals"]) if "gt_intervals" in d else None,
            gt_direction=tuple(d["gt_direction"]) if "gt_direction" in d else None,
            t=d.get("t"),
        )


def load_fixtures(path) -> list[QueryFixture]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(QueryFixture.from_dict(json.loads(line)))
    return out


def save_fixtures(fixtures, path) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        for f in fixtures:
            fh.write(json.dumps(f.to_dict(), sort_keys=True) + "\n")
    return path


@dataclass
class QueryResult:
    scene_id: str
    query_type: str
    error: float
    parse_ok: bool
    prediction: Any = None
    num_tool_calls: int = 0


@dataclass
class BenchmarkReport:
    rows: list[QueryResult] = field(default_factory=list)
    fingerprint: str = ""
    notes: list[str] = field(default_factory=list)

    @property
    def parse_failures(self) -> int:
        return sum(1 for r in self.rows if not r.parse_ok)

    def category_stats(self) -> dict[str, dict[str, float]]:
        out = {}
        for cat in CATEGORIES:
            errs = [r.error for r in self.rows if r.query_type == cat]
            if not errs:
                continue
            arr = np.asarray(errs, dtype=np.float64)
            std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
            out[cat] = {"mean": float(arr.mean()), "std": std, "count": len(errs)}
        return out

    def to_dict(self) -> dict:
        return {
            "fingerprint": self.fingerprint,
            "parse_failures": self.parse_failures,
            "num_queries": len(self.rows),
            "categories": self.category_stats(),
            "rows": [
                {
                    "scene_id": r.scene_id,
                    "query_type": r.query_type,
                    "error": r.error,
                    "parse_ok": r.parse_ok,
                    "num_tool_calls": r.num_tool_calls,
                }
                for r in self.rows
            ],
            "notes": list(self.notes),
        }

    def to_text(self) -> str:
        labels = {
            "spatial": "Spatial (px)",
            "temporal_pit": "Temporal PIT (steps)",
            "temporal_interval": "Temporal Interval (IoU)",
            "directional": "Directional (L1)",
        }
        stats = self.category_stats()
        width = max(len(v) for v in labels.values())
        lines = [f"{'Category':<{width}}  {'Mean +- Std':>16}  {'N':>4}"]
        for cat in CATEGORIES:
            if cat not in stats:
                continue
            s = stats[cat]
            lines.append(
                f"{labels[cat]:<{width}}  {s['mean']:>7.2f} +- {s['std']:<6.2f}  {s['count']:>4d}"
            )
        lines.append(f"parse failures: {self.parse_failures}/{len(self.rows)}")
        if self.fingerprint:
            lines.append(f"config: {self.fingerprint[:16]}")
        return "\n".join(lines)


def score_answer(fixture: QueryFixture, prediction, scene) -> float:
    """Score one prediction against its fixture, applying fallbacks."""
    t_total = scene.num_timesteps
    if fixture.query_type == "spatial":
        return spatial_error(
            prediction,
            fixture.gt_pixel,
            scene.camera,
            fixture.t,
            scene.manifest.width,
            scene.manifest.height,
        )
    if fixture.query_type == "temporal_pit":
        pred = prediction
        if not isinstance(pred, ParseFailure):
            # predictions outside the clip are clamped before scoring
            pred = int(np.clip(int(pred), 0, t_total - 1))
        return pit_error(pred, fixture.gt_timestep, t_total)
    if fixture.query_type == "temporal_interval":
        return interval_iou(prediction, fixture.gt_intervals)
    return direction_error(prediction, fixture.gt_direction)


def run_benchmark(fixtures, runner, scenes: dict, fingerprint: str = "") -> BenchmarkReport:
    """Run every fixture through `runner` (QueryFixture -> AgentAnswer-like
    object with .prediction/.parse_ok/.num_tool_calls) and aggregate."""
    report = BenchmarkReport(fingerprint=fingerprint)
    report.notes.append("point-in-time predictions are clamped to [0, T) before scoring")
    for fixture in fixtures:
        if fixture.scene_id not in scenes:
            raise MissingScene(f"fixture references unknown scene {fixture.scene_id!r}")
        scene = scenes[fixture.scene_id]
        answer = runner(fixture)
        pred = answer.prediction if answer.parse_ok else ParseFailure(
            getattr(answer, "failure_reason", "") or "unparseable answer"
        )
        report.rows.append(
            QueryResult(
                scene_id=fixture.scene_id,
                query_type=fixture.query_type,
                error=score_answer(fixture, pred, scene),
                parse_ok=answer.parse_ok,
                prediction=answer.prediction,
                num_tool_calls=getattr(answer, "num_tool_calls", 0),
            )
        )
    return report
