"""Drive one agent session against a chat-completions LLM endpoint.

The loop is the standard tool-calling protocol: send messages plus tool
schemas, execute whatever tool calls come back, append the results, repeat
until the model produces a final text answer or the step budget runs out.
Frame fetching attaches the requested frame as an image content part.
"""

from __future__ import annotations

import base64
import json
import re
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Optional

from ..errors import EndpointUnreachable
from ..evaluation import ParseFailure
from . import executor
from .schemas import as_llm_tools

PROMPT_VERSION = "system.v1"

_ANSWER_INSTRUCTIONS = {
    "spatial": (
        "Answer with a single JSON array of three numbers: the 3D world point "
        "[x, y, z] in meters, e.g. [0.12, -0.05, 1.30]."
    ),
    "temporal_pit": (
        "Answer with a single JSON array holding one integer timestep, e.g. [7]."
    ),
    "temporal_interval": (
        "Answer with a JSON array of [start, end] integer timestep pairs, e.g. [[2, 5], [8, 9]]."
    ),
    "directional": (
        "Answer with a JSON array of three integers, each -1, 0, or 1, for the x, y "
        "and z axes, e.g. [1, 0, -1]."
    ),
}


@dataclass(frozen=True)
class EndpointConfig:
    url: str
    model: str = "scene4d-agent"
    api_key: Optional[str] = None
    timeout: float = 60.0
    step_budget: int = 20
    temperature: float = 0.0


@dataclass
class AgentAnswer:
    query: str
    query_type: str
    prediction: Any
    parse_ok: bool
    failure_reason: str = ""
    transcript: list = field(default_factory=list)
    num_tool_calls: int = 0
    steps: int = 0


def _load_prompt() -> str:
    ref = resources.files(__package__).joinpath(f"prompts/{PROMPT_VERSION}.txt")
    return ref.read_text()


def system_prompt(scene, query_type: str) -> str:
    summary = executor.execute_tool(scene, "summary", {})
    return _load_prompt().format(
        scene_id=scene.manifest.scene_id,
        num_timesteps=scene.num_timesteps,
        last_timestep=scene.num_timesteps - 1,
        t_ref=scene.instances.t_ref,
        summary_json=json.dumps(summary["payload"], sort_keys=True),
        answer_instructions=_ANSWER_INSTRUCTIONS[query_type],
    )


def _post_chat(endpoint: EndpointConfig, body: dict) -> dict:
    data = json.dumps(body).encode()
    req = urllib.request.Request(
        endpoint.url,
        data=data,
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    if endpoint.api_key:
        req.add_header("Authorization", f"Bearer {endpoint.api_key}")
    try:
        with urllib.request.urlopen(req, timeout=endpoint.timeout) as resp:
            return json.loads(resp.read().decode())
    except (urllib.error.URLError, OSError, json.JSONDecodeError, TimeoutError) as exc:
        raise EndpointUnreachable(f"LLM endpoint {endpoint.url}: {exc}") from exc


_MEDIA_TYPES = {".png": "image/png", ".jpg": "image/jpeg", ".jpeg": "image/jpeg"}


def _frame_content(path: str, t: int) -> list[dict]:
    suffix = path[path.rfind(".") :].lower()
    media = _MEDIA_TYPES.get(suffix, "application/octet-stream")
    with open(path, "rb") as fh:
        b64 = base64.b64encode(fh.read()).decode("ascii")
    return [
        {"type": "text", "text": f"Frame at timestep {t}:"},
        {"type": "image_url", "image_url": {"url": f"data:{media};base64,{b64}"}},
    ]


def run_session(
    scene,
    query: str,
    query_type: str,
    endpoint: EndpointConfig,
    frame_fetching: bool = False,
) -> AgentAnswer:
    """Run the tool loop for one query; never raises on tool errors or
    budget exhaustion, only on an unreachable endpoint."""
    messages: list[dict] = [
        {"role": "system", "content": system_prompt(scene, query_type)},
        {"role": "user", "content": query},
    ]
    num_calls = 0
    steps = 0
    while steps < endpoint.step_budget:
        steps += 1
        resp = _post_chat(
            endpoint,
            {
                "model": endpoint.model,
                "messages": messages,
                "tools": as_llm_tools(frame_fetching),
                "tool_choice": "auto",
                "temperature": endpoint.temperature,
            },
        )
        try:
            message = resp["choices"][0]["message"]
        except (KeyError, IndexError, TypeError) as exc:
            raise EndpointUnreachable(f"malformed chat response: {exc}") from exc
        messages.append(message)

        tool_calls = message.get("tool_calls") or []
        if not tool_calls:
            text = message.get("content") or ""
            prediction = parse_answer(text, query_type)
            failed = isinstance(prediction, ParseFailure)
            return AgentAnswer(
                query=query,
                query_type=query_type,
                prediction=None if failed else prediction,
                parse_ok=not failed,
                failure_reason=prediction.reason if failed else "",
                transcript=messages,
                num_tool_calls=num_calls,
                steps=steps,
            )

        frame_attachments = []
        for call in tool_calls:
            num_calls += 1
            fn = call.get("function", {})
            name = fn.get("name", "")
            try:
                args = json.loads(fn.get("arguments") or "{}")
            except json.JSONDecodeError:
                args = None
            if name == "fetch_frame" and not frame_fetching:
                result = {
                    "status": "error",
                    "error": {"code": "tool_disabled", "message": "frame fetching is disabled"},
                }
            else:
                result = executor.execute_tool(scene, name, args)
            if name == "fetch_frame" and result["status"] == "ok":
                path = result["payload"]["path"]
                t = result["payload"]["t"]
                frame_attachments.append(_frame_content(path, t))
                result = {"status": "ok", "payload": {"t": t, "note": "frame image attached below"}}
            messages.append(
                {
                    "role": "tool",
                    "tool_call_id": call.get("id", ""),
                    "content": json.dumps(result, sort_keys=True),
                }
            )
        for content in frame_attachments:
            messages.append({"role": "user", "content": content})

    return AgentAnswer(
        query=query,
        query_type=query_type,
        prediction=None,
        parse_ok=False,
        failure_reason=f"step budget ({endpoint.step_budget}) exhausted",
        transcript=messages,
        num_tool_calls=num_calls,
        steps=steps,
    )


_FENCE_RE = re.compile(r"```[a-zA-Z]*\n?(.*?)```", re.DOTALL)


def _candidates(text: str):
    """All fenced JSON blocks and balanced bracket substrings, with end offsets."""
    out = []
    for m in _FENCE_RE.finditer(text):
        out.append((m.group(1).strip(), m.end()))
    starts = []
    for i, ch in enumerate(text):
        if ch == "[":
            starts.append(i)
        elif ch == "]" and starts:
            start = starts.pop()
            out.append((text[start : i + 1], i + 1))
    out.sort(key=lambda c: c[1])
    return out


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _validate(value, query_type: str):
    if query_type == "spatial":
        if isinstance(value, list) and len(value) == 3 and all(_is_num(v) for v in value):
            return tuple(float(v) for v in value)
    elif query_type == "temporal_pit":
        if _is_int(value):
            return int(value)
        if isinstance(value, list) and len(value) == 1 and _is_int(value[0]):
            return int(value[0])
    elif query_type == "temporal_interval":
        if isinstance(value, list) and len(value) == 2 and all(_is_int(v) for v in value):
            return ((int(value[0]), int(value[1])),)
        if (
            isinstance(value, list)
            and value
            and all(
                isinstance(p, list) and len(p) == 2 and all(_is_int(v) for v in p) for p in value
            )
        ):
            return tuple((int(p[0]), int(p[1])) for p in value)
    elif query_type == "directional":
        if (
            isinstance(value, list)
            and len(value) == 3
            and all(_is_int(v) and v in (-1, 0, 1) for v in value)
        ):
            return tuple(int(v) for v in value)
    return None


def parse_answer(text: str, query_type: str):
    """Extract the last well-formed answer value for the query type; returns
    a ParseFailure value (never raises) when none exists."""
    if query_type not in _ANSWER_INSTRUCTIONS:
        return ParseFailure(f"unknown query type {query_type!r}")
    best = None
    for cand, _ in _candidates(text):
        try:
            value = json.loads(cand)
        except (json.JSONDecodeError, ValueError):
            continue
        parsed = _validate(value, query_type)
        if parsed is not None:
            best = parsed
    if best is None:
        return ParseFailure(f"no {query_type} answer found in reply")
    return best
