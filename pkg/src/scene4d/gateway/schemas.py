"""Tool registry: one schema per toolkit operation, mirrored to the LLM
tool-calling wire format."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Param:
    name: str
    type: str  # integer | number | boolean | string
    required: bool
    description: str


@dataclass(frozen=True)
class ToolSchema:
    name: str
    description: str
    params: tuple[Param, ...]
    returns: str


_PRECISE = Param("precise", "boolean", False, "Return full float precision instead of 4 decimals.")

TOOLS: tuple[ToolSchema, ...] = (
    ToolSchema(
        "summary",
        "Geometric summary of every instance in the scene: class, centroid and "
        "axis-aligned extent at the reference timestep, presence span.",
        (_PRECISE,),
        "{t_ref, num_timesteps, instances: [{id, class_id, class_name, points, "
        "centroid[3], extent[3], first_present, last_present}]}",
    ),
    ToolSchema(
        "min_distance",
        "Minimum 3D distance in meters between two instances. With t, a single "
        "value; without, the full per-timestep series.",
        (
            Param("a", "integer", True, "First instance id."),
            Param("b", "integer", True, "Second instance id."),
            Param("t", "integer", False, "Timestep; omit for the whole series."),
            _PRECISE,
        ),
        "{meters, t, stale} or {series: [{t, meters, stale}]}",
    ),
    ToolSchema(
        "overlap_score",
        "Symmetric 3D overlap between two instances at a timestep, in [0, 1].",
        (
            Param("a", "integer", True, "First instance id."),
            Param("b", "integer", True, "Second instance id."),
            Param("t", "integer", True, "Timestep."),
            _PRECISE,
        ),
        "{score, t, stale}",
    ),
    ToolSchema(
        "overlap_position",
        "3D centroid of the region where two instances overlap at a timestep; "
        "position is null when they do not overlap.",
        (
            Param("a", "integer", True, "First instance id."),
            Param("b", "integer", True, "Second instance id."),
            Param("t", "integer", True, "Timestep."),
            _PRECISE,
        ),
        "{position: [x, y, z] | null, t, stale}",
    ),
    ToolSchema(
        "relative_motion",
        "Motion of instance a relative to instance b between two timesteps, as a "
        "3D vector in meters (common motion cancels).",
        (
            Param("a", "integer", True, "Moving instance id."),
            Param("b", "integer", True, "Reference instance id."),
            Param("t0", "integer", True, "Start timestep (t0 < t1)."),
            Param("t1", "integer", True, "End timestep."),
            _PRECISE,
        ),
        "{vector: [dx, dy, dz], t0, t1, stale}",
    ),
    ToolSchema(
        "trajectory",
        "Per-timestep 3D centroid of an instance, optionally subsampled.",
        (
            Param("a", "integer", True, "Instance id."),
            Param("stride", "integer", False, "Sample every stride-th timestep (default 1)."),
            _PRECISE,
        ),
        "{points: [{t, centroid[3], present}], stride}",
    ),
    ToolSchema(
        "dominant_direction",
        "Discretized motion direction of an instance between two timesteps: one "
        "of -1, 0, 1 per world axis (+x right, +y down, +z away from camera).",
        (
            Param("a", "integer", True, "Instance id."),
            Param("t0", "integer", True, "Start timestep (t0 < t1)."),
            Param("t1", "integer", True, "End timestep."),
            Param("deadzone", "number", False, "Relative threshold below which an axis snaps to 0."),
        ),
        "{direction: [dx, dy, dz], t0, t1, stale}",
    ),
    ToolSchema(
        "fetch_frame",
        "Fetch the raw video frame image for a timestep.",
        (Param("t", "integer", True, "Timestep."),),
        "frame image (PNG/JPEG)",
    ),
)

TOOL_NAMES = tuple(t.name for t in TOOLS)


def schema_dicts() -> list[dict]:
    return [
        {
            "name": t.name,
            "description": t.description,
            "parameters": [
                {"name": p.name, "type": p.type, "required": p.required, "description": p.description}
                for p in t.params
            ],
            "returns": t.returns,
        }
        for t in TOOLS
    ]


_JSON_TYPES = {"integer": "integer", "number": "number", "boolean": "boolean", "string": "string"}


def as_llm_tools(frame_fetching: bool = True) -> list[dict]:
    """Chat-completions `tools` array; fetch_frame included only on request."""
    out = []
    for t in TOOLS:
        if t.name == "fetch_frame" and not frame_fetching:
            continue
        props = {
            p.name: {"type": _JSON_TYPES[p.type], "description": p.description} for p in t.params
        }
        out.append(
            {
                "type": "function",
                "function": {
                    "name": t.name,
                    "description": f"{t.description} Returns {t.returns}",
                    "parameters": {
                        "type": "object",
                        "properties": props,
                        "required": [p.name for p in t.params if p.required],
                    },
                },
            }
        )
    return out
