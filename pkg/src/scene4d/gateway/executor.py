"""Execute tool calls against a Scene4D and shape JSON-safe results.

Every call yields a result dict, never an exception: domain errors map to
stable error codes so a session can observe a failure and keep going.
Floats are rounded to 4 decimals unless the call passes "precise": true.
"""

from __future__ import annotations

import numpy as np

from .. import toolkit
from ..errors import (
    BadInterval,
    EmptyMembership,
    EmptySet,
    FrameUnavailable,
    OutOfRange,
    UnknownInstance,
)
from .schemas import TOOLS

ROUND_DECIMALS = 4

_SCHEMAS = {t.name: t for t in TOOLS}


def _jsonable(obj, precise: bool):
    if isinstance(obj, dict):
        return {k: _jsonable(v, precise) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v, precise) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v, precise) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if precise else round(f, ROUND_DECIMALS)
    return obj


def _check_args(name: str, args: dict):
    schema = _SCHEMAS[name]
    known = {p.name for p in schema.params}
    for key in args:
        if key not in known:
            raise TypeError(f"unexpected argument {key!r} for {name}")
    for p in schema.params:
        if p.name not in args:
            if p.required:
                raise TypeError(f"{name} requires argument {p.name!r}")
            continue
        val = args[p.name]
        if p.type == "integer" and (isinstance(val, bool) or not isinstance(val, int)):
            raise TypeError(f"argument {p.name!r} must be an integer")
        if p.type == "number" and (isinstance(val, bool) or not isinstance(val, (int, float))):
            raise TypeError(f"argument {p.name!r} must be a number")
        if p.type == "boolean" and not isinstance(val, bool):
            raise TypeError(f"argument {p.name!r} must be a boolean")


def _summary(scene, args):
    rows = []
    for s in toolkit.scene_summary(scene):
        rows.append(
            {
                "id": s.instance_id,
                "class_id": s.class_id,
                "class_name": s.class_name,
                "points": s.num_points,
                "centroid": s.centroid,
                "extent": s.extent,
                "first_present": s.first_present,
                "last_present": s.last_present,
            }
        )
    return {
        "t_ref": scene.instances.t_ref,
        "num_timesteps": scene.num_timesteps,
        "instances": rows,
    }


def _min_distance(scene, args):
    if "t" in args:
        meters, stale = toolkit.min_distance(scene, args["a"], args["b"], args["t"])
        return {"meters": meters, "t": args["t"], "stale": stale}
    series, stale = toolkit.min_distance(scene, args["a"], args["b"], None)
    return {
        "series": [
            {"t": t, "meters": float(series[t]), "stale": bool(stale[t])}
            for t in range(series.shape[0])
        ]
    }


def _overlap_score(scene, args):
    score, stale = toolkit.overlap_score(scene, args["a"], args["b"], args["t"])
    return {"score": score, "t": args["t"], "stale": stale}


def _overlap_position(scene, args):
    pos, stale = toolkit.overlap_position(scene, args["a"], args["b"], args["t"])
    return {"position": pos, "t": args["t"], "stale": stale}


def _relative_motion(scene, args):
    vec, stale = toolkit.relative_motion(scene, args["a"], args["b"], args["t0"], args["t1"])
    return {"vector": vec, "t0": args["t0"], "t1": args["t1"], "stale": stale}


def _trajectory(scene, args):
    stride = args.get("stride", 1)
    points = toolkit.trajectory(scene, args["a"], stride)
    return {
        "points": [{"t": t, "centroid": c, "present": p} for t, c, p in points],
        "stride": stride,
    }


def _dominant_direction(scene, args):
    deadzone = args.get("deadzone", toolkit.DIRECTION_DEADZONE)
    direction, stale = toolkit.dominant_direction(
        scene, args["a"], args["t0"], args["t1"], deadzone
    )
    return {"direction": list(direction), "t0": args["t0"], "t1": args["t1"], "stale": stale}


def _fetch_frame(scene, args):
    path = toolkit.fetch_frame(scene, args["t"])
    return {"t": args["t"], "path": str(path)}


_HANDLERS = {
    "summary": _summary,
    "min_distance": _min_distance,
    "overlap_score": _overlap_score,
    "overlap_position": _overlap_position,
    "relative_motion": _relative_motion,
    "trajectory": _trajectory,
    "dominant_direction": _dominant_direction,
    "fetch_frame": _fetch_frame,
}

_ERROR_CODES = (
    (UnknownInstance, "unknown_instance"),
    (OutOfRange, "out_of_range"),
    (BadInterval, "bad_interval"),
    (FrameUnavailable, "frame_unavailable"),
    ((EmptySet, EmptyMembership), "empty_set"),
    ((TypeError, ValueError), "bad_arguments"),
)


def _error(code: str, message: str) -> dict:
    return {"status": "error", "error": {"code": code, "message": message}}


def execute_tool(scene, name: str, arguments: dict | None) -> dict:
    """Run one tool call; returns {"status": "ok", "payload": ...} or an
    error result with a stable code. Never raises."""
    args = arguments or {}
    if name not in _HANDLERS:
        return _error("unknown_tool", f"no tool named {name!r}")
    if not isinstance(args, dict):
        return _error("bad_arguments", "arguments must be a JSON object")
    try:
        _check_args(name, args)
        payload = _HANDLERS[name](scene, args)
    except Exception as exc:  # noqa: BLE001 - sessions must survive any tool error
        for types, code in _ERROR_CODES:
            if isinstance(exc, types):
                return _error(code, str(exc))
        return _error("internal", f"{type(exc).__name__}: {exc}")
    precise = bool(args.get("precise", False))
    return {"status": "ok", "payload": _jsonable(payload, precise)}
