"""Raw tensor container: little-endian row-major blobs described by JSON entries.

A tensor descriptor is ``{"path": ..., "dtype": ..., "shape": [...],
"layout": "row_major"}``. Scene inputs use f32/u16/u8; derived artifacts
may additionally use f64/i64/i32.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import MissingFile, SchemaViolation, ShapeMismatch

DTYPES = {
    "f32": np.dtype("<f4"),
    "f64": np.dtype("<f8"),
    "u8": np.dtype("|u1"),
    "u16": np.dtype("<u2"),
    "i32": np.dtype("<i4"),
    "i64": np.dtype("<i8"),
}
_CODES = {v: k for k, v in DTYPES.items()}


def dtype_code(arr: np.ndarray) -> str:
    code = _CODES.get(arr.dtype.newbyteorder("<"))
    if code is None:
        raise SchemaViolation("dtype", f"unsupported dtype {arr.dtype}")
    return code


def descriptor(relpath: str, arr: np.ndarray) -> dict:
    return {
        "path": relpath,
        "dtype": dtype_code(arr),
        "shape": list(arr.shape),
        "layout": "row_major",
    }


def parse_descriptor(field: str, entry) -> tuple[str, np.dtype, tuple[int, ...]]:
    if not isinstance(entry, dict):
        raise SchemaViolation(field, "tensor descriptor must be an object")
    for key in ("path", "dtype", "shape"):
        if key not in entry:
            raise SchemaViolation(field, f"descriptor missing {key!r}")
    if entry.get("layout", "row_major") != "row_major":
        raise SchemaViolation(field, f"unsupported layout {entry['layout']!r}")
    if entry["dtype"] not in DTYPES:
        raise SchemaViolation(field, f"unsupported dtype {entry['dtype']!r}")
    shape = entry["shape"]
    if not isinstance(shape, list) or not all(
        isinstance(d, int) and d >= 0 for d in shape
    ):
        raise SchemaViolation(field, f"bad shape {shape!r}")
    return entry["path"], DTYPES[entry["dtype"]], tuple(shape)


def read_blob(base_dir: Path, field: str, entry) -> np.ndarray:
    relpath, dtype, shape = parse_descriptor(field, entry)
    path = Path(base_dir) / relpath
    if not path.is_file():
        raise MissingFile(field, f"blob not found: {path}")
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    actual = path.stat().st_size
    if actual != expected:
        raise ShapeMismatch(
            field, f"blob {path.name} holds {actual} bytes, shape {shape} needs {expected}"
        )
    data = np.fromfile(path, dtype=dtype)
    return data.reshape(shape)


def write_blob(base_dir: Path, relpath: str, arr: np.ndarray) -> dict:
    path = Path(base_dir) / relpath
    path.parent.mkdir(parents=True, exist_ok=True)
    out = np.ascontiguousarray(arr).astype(arr.dtype.newbyteorder("<"), copy=False)
    out.tofile(path)
    return descriptor(relpath, out)


def dump_json(path: Path, obj) -> None:
    """Canonical JSON: sorted keys, fixed separators (byte-stable reruns)."""
    Path(path).write_text(
        json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"
    )


def load_json(path: Path, field: str = "manifest"):
    path = Path(path)
    if not path.is_file():
        raise MissingFile(field, f"file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaViolation(field, f"invalid JSON: {exc}") from exc
