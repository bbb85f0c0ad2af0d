"""Deterministic scripted chat-completions endpoint for tests and benchmarks.

Speaks just enough of the tool-calling protocol to drive a session: it
parses the structured query phrasing the fixture generator emits, requests
one tool call, computes the answer from the returned JSON, and replies in
the required bracketed format. No model, no randomness, no network beyond
localhost.

Query phrasing it understands:
  "Where do instances A and B come into contact at t=T? ..."      (spatial)
  "At which timestep are instances A and B closest ..."           (temporal_pit)
  "During which timesteps are instances A and B within X meters"  (temporal_interval)
  "In which direction does instance A move from t=T0 to t=T1"     (directional)
An optional "inspect frame t=K first" clause makes it request fetch_frame
before the main tool call. In prose mode it answers free text with no
parseable value.
"""

from __future__ import annotations

import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

_PAIR = re.compile(r"instances (\d+) and (\d+)")
_SINGLE = re.compile(r"instance (\d+)")
_AT_T = re.compile(r"at t=(\d+)")
_SPAN = re.compile(r"from t=(\d+) to t=(\d+)")
_THRESHOLD = re.compile(r"within ([0-9.]+) meters")
_INSPECT = re.compile(r"inspect frame t=(\d+)")


def _user_query(messages) -> str:
    for msg in messages:
        if msg.get("role") == "user" and isinstance(msg.get("content"), str):
            return msg["content"]
    return ""


def _tool_results(messages) -> list[dict]:
    out = []
    for msg in messages:
        if msg.get("role") == "tool":
            try:
                out.append(json.loads(msg.get("content") or "{}"))
            except json.JSONDecodeError:
                out.append({})
    return out


def _call(name: str, arguments: dict, n: int) -> dict:
    return {
        "role": "assistant",
        "content": None,
        "tool_calls": [
            {
                "id": f"call_{n}",
                "type": "function",
                "function": {"name": name, "arguments": json.dumps(arguments)},
            }
        ],
    }


def _final(text: str) -> dict:
    return {"role": "assistant", "content": text}


def _intervals_at_most(series, threshold: float):
    runs = []
    start = None
    for row in series:
        if row["meters"] <= threshold:
            if start is None:
                start = row["t"]
            end = row["t"]
        elif start is not None:
            runs.append([start, end])
            start = None
    if start is not None:
        runs.append([start, end])
    return runs


def scripted_reply(messages, prose: bool = False) -> dict:
    """Next assistant message for the scripted policy."""
    query = _user_query(messages)
    if prose:
        return _final(
            "The instrument appears to drift toward the tissue while slowly "
            "retracting; hard to say more without another look."
        )
    results = _tool_results(messages)
    n = len(results)

    wants_frame = _INSPECT.search(query)
    if wants_frame and n == 0:
        return _call("fetch_frame", {"t": int(wants_frame.group(1))}, 0)
    # index of the main tool result once the optional frame step is consumed
    main = results[-1] if (not wants_frame and n == 1) or (wants_frame and n == 2) else None

    # guard every branch on its detail patterns so a phrasing the script
    # does not know gets the fallback reply instead of a handler crash
    pair = _PAIR.search(query)
    at_t = _AT_T.search(query)
    if "come into contact" in query and pair and at_t:
        if main is None:
            a, b = int(pair.group(1)), int(pair.group(2))
            return _call("overlap_position", {"a": a, "b": b, "t": int(at_t.group(1))}, n)
        pos = (main.get("payload") or {}).get("position")
        if pos is None:
            return _final("The tool reported no overlap; I cannot name a contact point.")
        return _final(f"The instances meet at {json.dumps(pos)}")

    if "At which timestep" in query and pair:
        if main is None:
            a, b = int(pair.group(1)), int(pair.group(2))
            return _call("min_distance", {"a": a, "b": b}, n)
        series = (main.get("payload") or {}).get("series") or []
        if not series:
            return _final("No distance series available.")
        best = min(series, key=lambda row: (row["meters"], row["t"]))
        return _final(f"They are closest at timestep [{best['t']}]")

    threshold = _THRESHOLD.search(query)
    if "During which timesteps" in query and pair and threshold:
        if main is None:
            a, b = int(pair.group(1)), int(pair.group(2))
            return _call("min_distance", {"a": a, "b": b}, n)
        series = (main.get("payload") or {}).get("series") or []
        runs = _intervals_at_most(series, float(threshold.group(1)))
        if not runs:
            return _final("They are never that close.")
        return _final(f"Within range during {json.dumps(runs)}")

    single = _SINGLE.search(query)
    span = _SPAN.search(query)
    if "which direction" in query and single and span:
        if main is None:
            a = int(single.group(1))
            t0, t1 = (int(g) for g in span.groups())
            return _call("dominant_direction", {"a": a, "t0": t0, "t1": t1}, n)
        direction = (main.get("payload") or {}).get("direction")
        if direction is None:
            return _final("Direction unavailable.")
        return _final(f"The instance moves along {json.dumps(direction)}")

    return _final("I do not understand the question.")


class _Handler(BaseHTTPRequestHandler):
    server: "MockLLM"

    def do_POST(self):
        if self.path.rstrip("/") != "/v1/chat/completions":
            self._send(404, {"error": "not found"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            body = json.loads(self.rfile.read(length).decode())
            messages = body["messages"]
        except (ValueError, KeyError):
            self._send(400, {"error": "malformed request"})
            return
        message = scripted_reply(messages, prose=self.server.prose)
        self.server.request_count += 1
        self._send(
            200,
            {
                "id": f"mock-{self.server.request_count}",
                "object": "chat.completion",
                "model": "scripted-mock",
                "choices": [
                    {
                        "index": 0,
                        "message": message,
                        "finish_reason": "tool_calls" if message.get("tool_calls") else "stop",
                    }
                ],
            },
        )

    def _send(self, status: int, obj: dict):
        data = json.dumps(obj).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, fmt, *args):  # keep test output clean
        pass


class MockLLM(ThreadingHTTPServer):
    """Scripted endpoint; use as a context manager or call start()/close()."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0, prose: bool = False):
        super().__init__((host, port), _Handler)
        self.prose = prose
        self.request_count = 0
        self._thread = None

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}/v1/chat/completions"

    def start(self):
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def close(self):
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.close()
        return False
