"""Tensor blob container: descriptors, round trips, corruption detection."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scene4d.container import (
    DTYPES,
    descriptor,
    dtype_code,
    dump_json,
    load_json,
    parse_descriptor,
    read_blob,
    write_blob,
)
from scene4d.errors import MissingFile, SchemaViolation, ShapeMismatch


@pytest.mark.parametrize("code", sorted(DTYPES))
def test_blob_round_trip_per_dtype(tmp_path, code):
    rng = np.random.default_rng(hash(code) % 2**31)
    if code.startswith("f"):
        arr = rng.normal(size=(3, 4, 2)).astype(DTYPES[code])
    else:
        info = np.iinfo(DTYPES[code])
        arr = rng.integers(info.min, info.max, size=(3, 4, 2), endpoint=True).astype(
            DTYPES[code]
        )
    entry = write_blob(tmp_path, f"sub/{code}.bin", arr)
    assert entry == {
        "path": f"sub/{code}.bin",
        "dtype": code,
        "shape": [3, 4, 2],
        "layout": "row_major",
    }
    back = read_blob(tmp_path, code, entry)
    np.testing.assert_array_equal(back, arr)
    assert back.dtype == DTYPES[code]


def test_write_blob_is_little_endian_row_major(tmp_path):
    arr = np.arange(6, dtype=">f4").reshape(2, 3)  # big-endian input
    entry = write_blob(tmp_path, "x.bin", arr)
    raw = (tmp_path / "x.bin").read_bytes()
    assert raw == np.arange(6, dtype="<f4").tobytes()
    assert entry["dtype"] == "f32"


def test_write_blob_handles_noncontiguous(tmp_path):
    base = np.arange(24, dtype=np.float32).reshape(4, 6)
    view = base[:, ::2]
    entry = write_blob(tmp_path, "v.bin", view)
    np.testing.assert_array_equal(read_blob(tmp_path, "v", entry), view)


def test_dtype_code_rejects_unsupported():
    with pytest.raises(SchemaViolation):
        dtype_code(np.zeros(2, dtype=np.complex128))


def test_descriptor_shape_is_plain_list():
    d = descriptor("a.bin", np.zeros((2, 5), dtype=np.uint8))
    assert d["shape"] == [2, 5]
    assert all(isinstance(x, int) for x in d["shape"])
    json.dumps(d)  # must be serializable as-is


@pytest.mark.parametrize(
    "entry,msg",
    [
        ("nope", "must be an object"),
        ({"dtype": "f32", "shape": [1]}, "missing 'path'"),
        ({"path": "a", "shape": [1]}, "missing 'dtype'"),
        ({"path": "a", "dtype": "f32"}, "missing 'shape'"),
        ({"path": "a", "dtype": "f32", "shape": [1], "layout": "col_major"}, "layout"),
        ({"path": "a", "dtype": "f16", "shape": [1]}, "unsupported dtype"),
        ({"path": "a", "dtype": "f32", "shape": [1.5]}, "bad shape"),
        ({"path": "a", "dtype": "f32", "shape": [-1]}, "bad shape"),
        ({"path": "a", "dtype": "f32", "shape": (2,)}, "bad shape"),
    ],
)
def test_parse_descriptor_rejects(entry, msg):
    with pytest.raises(SchemaViolation, match=msg):
        parse_descriptor("field", entry)


def test_parse_descriptor_accepts_minimal():
    path, dt, shape = parse_descriptor("f", {"path": "p.bin", "dtype": "u16", "shape": [7]})
    assert path == "p.bin" and dt == np.dtype("<u2") and shape == (7,)


def test_read_blob_missing_file(tmp_path):
    with pytest.raises(MissingFile):
        read_blob(tmp_path, "f", {"path": "gone.bin", "dtype": "f32", "shape": [2]})


def test_read_blob_truncated_file(tmp_path):
    arr = np.zeros((4, 4), dtype=np.float32)
    entry = write_blob(tmp_path, "t.bin", arr)
    (tmp_path / "t.bin").write_bytes((tmp_path / "t.bin").read_bytes()[:-4])
    with pytest.raises(ShapeMismatch, match="60 bytes"):
        read_blob(tmp_path, "f", entry)


def test_read_blob_oversized_file(tmp_path):
    arr = np.zeros(3, dtype=np.float64)
    entry = write_blob(tmp_path, "o.bin", arr)
    with open(tmp_path / "o.bin", "ab") as fh:
        fh.write(b"\x00" * 8)
    with pytest.raises(ShapeMismatch):
        read_blob(tmp_path, "f", entry)


def test_dump_json_canonical_bytes(tmp_path):
    obj = {"b": 2, "a": [1, {"z": True, "y": None}]}
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    dump_json(p1, obj)
    dump_json(p2, {"a": [1, {"y": None, "z": True}], "b": 2})  # same data, other order
    assert p1.read_bytes() == p2.read_bytes()
    assert p1.read_text() == '{"a":[1,{"y":null,"z":true}],"b":2}\n'


def test_load_json_errors(tmp_path):
    with pytest.raises(MissingFile):
        load_json(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(SchemaViolation, match="invalid JSON"):
        load_json(bad, "cfg")


@settings(deadline=None, max_examples=50)
@given(
    code=st.sampled_from(sorted(DTYPES)),
    shape=st.lists(st.integers(0, 5), min_size=1, max_size=3),
    seed=st.integers(0, 2**31),
)
def test_blob_round_trip_property(tmp_path_factory, code, shape, seed):
    tmp = tmp_path_factory.mktemp("blob")
    rng = np.random.default_rng(seed)
    n = int(np.prod(shape))
    if code.startswith("f"):
        arr = rng.normal(size=n).astype(DTYPES[code]).reshape(shape)
    else:
        info = np.iinfo(DTYPES[code])
        arr = rng.integers(info.min, info.max, size=n, endpoint=True).astype(
            DTYPES[code]
        ).reshape(shape)
    entry = write_blob(tmp, "h.bin", arr)
    np.testing.assert_array_equal(read_blob(tmp, "h", entry), arr)
