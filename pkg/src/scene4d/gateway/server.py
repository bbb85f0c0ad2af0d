"""HTTP gateway exposing scene tools to agents on other processes or hosts.

Routes:
  GET  /scenes                    -> {"scenes": [{"scene_id", "num_timesteps", ...}]}
  GET  /tools                     -> {"tools": [schema, ...]}
  GET  /scenes/{id}/summary       -> summary tool result
  POST /scenes/{id}/call          -> {"tool": name, "arguments": {...}} executed
  GET  /scenes/{id}/frames/{t}    -> frame image bytes

Tool failures are part of the protocol, not transport errors: /call always
answers 200 with a {"status": "ok"|"error"} body. Transport-level problems
(unknown scene, bad route, malformed JSON) use 4xx.
"""

from __future__ import annotations

import json
import mimetypes
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..errors import BindFailure
from ..toolkit import Scene4D, scene_summary
from .executor import execute_tool
from .schemas import schema_dicts

_SCENE_ROUTE = re.compile(r"^/scenes/([A-Za-z0-9_.-]+)(/.*)?$")
_FRAME_ROUTE = re.compile(r"^/frames/(\d+)$")


def _canonical(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n").encode()


class _Handler(BaseHTTPRequestHandler):
    server: "GatewayServer"

    # -- plumbing ---------------------------------------------------------

    def _json(self, status: int, obj: dict):
        data = _canonical(obj)
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _bytes(self, data: bytes, content_type: str):
        self.send_response(200)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, fmt, *args):
        pass

    def _scene(self, scene_id: str):
        scene = self.server.scenes.get(scene_id)
        if scene is None:
            self._json(404, {"error": f"unknown scene {scene_id!r}"})
        return scene

    # -- routes -----------------------------------------------------------

    def do_GET(self):
        path = self.path.split("?", 1)[0].rstrip("/") or "/"
        if path == "/scenes":
            rows = []
            for scene_id in sorted(self.server.scenes):
                scene = self.server.scenes[scene_id]
                rows.append(
                    {
                        "scene_id": scene_id,
                        "num_timesteps": scene.manifest.num_timesteps,
                        "num_instances": len(scene.instances),
                        "width": scene.manifest.width,
                        "height": scene.manifest.height,
                    }
                )
            self._json(200, {"scenes": rows})
            return
        if path == "/tools":
            self._json(200, {"tools": schema_dicts()})
            return
        m = _SCENE_ROUTE.match(path)
        if m:
            scene = self._scene(m.group(1))
            if scene is None:
                return
            rest = m.group(2) or ""
            if rest == "/summary":
                self._json(200, execute_tool(scene, "summary", {}))
                return
            fm = _FRAME_ROUTE.match(rest)
            if fm:
                self._send_frame(scene, m.group(1), int(fm.group(1)))
                return
        self._json(404, {"error": f"no route for {path!r}"})

    def do_POST(self):
        path = self.path.split("?", 1)[0].rstrip("/")
        m = _SCENE_ROUTE.match(path)
        if not m or (m.group(2) or "") != "/call":
            self._json(404, {"error": f"no route for {path!r}"})
            return
        scene = self._scene(m.group(1))
        if scene is None:
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            body = json.loads(self.rfile.read(length).decode())
            tool = body["tool"]
            arguments = body.get("arguments", {})
        except (ValueError, KeyError, UnicodeDecodeError):
            self._json(400, {"error": "body must be JSON with a 'tool' field"})
            return
        result = execute_tool(scene, tool, arguments)
        if (
            result["status"] == "ok"
            and tool == "fetch_frame"
            and isinstance(result.get("payload"), dict)
        ):
            # local paths mean nothing to a remote caller; hand out a URL
            payload = dict(result["payload"])
            payload.pop("path", None)
            payload["url"] = f"/scenes/{m.group(1)}/frames/{payload['t']}"
            result = dict(result, payload=payload)
        self._json(200, result)

    def _send_frame(self, scene: Scene4D, scene_id: str, t: int):
        result = execute_tool(scene, "fetch_frame", {"t": t})
        if result["status"] != "ok":
            self._json(404, result)
            return
        path = result["payload"]["path"]
        content_type = mimetypes.guess_type(path)[0] or "application/octet-stream"
        try:
            with open(path, "rb") as fh:
                data = fh.read()
        except OSError:
            self._json(404, {"error": f"frame file missing for t={t}"})
            return
        self._bytes(data, content_type)


class GatewayServer(ThreadingHTTPServer):
    """Serve one or more built scenes over HTTP."""

    def __init__(self, scenes: dict[str, Scene4D], host: str = "127.0.0.1", port: int = 0):
        try:
            super().__init__((host, port), _Handler)
        except OSError as exc:
            raise BindFailure(f"cannot bind {host}:{port}: {exc}") from exc
        self.scenes = dict(scenes)
        self._thread = None

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"

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


def summarize_scene(scene: Scene4D) -> dict:
    """Convenience wrapper used by the CLI 'serve' banner."""
    return {"instances": len(scene.instances), "summary": scene_summary(scene)}
