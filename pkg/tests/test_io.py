"""Serialization: deterministic 17-digit JSON and the RSF1 field format."""

from __future__ import annotations

import json

import numpy as np
import pytest

from relstar.fieldio import MAGIC, read_field, write_field
from relstar.jsonio import dump_json17, to_json17


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------


def test_json17_scalars():
    assert to_json17(None) == "null"
    assert to_json17(True) == "true"
    assert to_json17(np.bool_(False)) == "false"
    assert to_json17(np.int64(42)) == "42"
    assert to_json17("a \"b\"") == '"a \\"b\\""'
    assert to_json17(0.1) == format(0.1, ".17g")
    assert to_json17(np.nan) == "NaN"
    assert to_json17(np.inf) == "Infinity"
    assert to_json17(-np.inf) == "-Infinity"
    with pytest.raises(TypeError):
        to_json17(object())


def test_json17_float_roundtrip():
    """17 significant digits reproduce every double exactly."""
    rng = np.random.default_rng(2)
    for x in rng.standard_normal(50) * 10.0 ** rng.integers(-8, 8, 50):
        assert float(to_json17(float(x))) == x


def test_json17_sorted_keys_and_nesting():
    obj = {"b": [1, 2.5], "a": {"y": None, "x": True}}
    text = to_json17(obj)
    assert text.index('"a"') < text.index('"b"')
    assert text.index('"x"') < text.index('"y"')
    parsed = json.loads(text)
    assert parsed == {"a": {"x": True, "y": None}, "b": [1, 2.5]}
    assert to_json17(obj) == text  # deterministic
    assert to_json17({}) == "{}"
    assert to_json17([]) == "[]"


def test_dump_json17(tmp_path):
    path = tmp_path / "out.json"
    dump_json17({"v": 1.0 / 3.0, "arr": np.array([1.0, 2.0])}, path)
    text = path.read_text()
    assert text.endswith("\n")
    assert json.loads(text) == {"v": 1.0 / 3.0, "arr": [1.0, 2.0]}


# ---------------------------------------------------------------------------
# RSF1
# ---------------------------------------------------------------------------


def test_rsf1_real_roundtrip(tmp_path, rng):
    values = rng.standard_normal((8, 8, 8))
    path = tmp_path / "f.rsf1"
    write_field(path, values, 6.0)
    back, box = read_field(path)
    assert box == 6.0
    assert back.dtype == np.float64
    assert np.array_equal(back, values)


def test_rsf1_complex_roundtrip(tmp_path, rng):
    values = rng.standard_normal((4, 4, 4)) + 1j * rng.standard_normal((4, 4, 4))
    path = tmp_path / "c.rsf1"
    write_field(path, values, 3.5)
    back, box = read_field(path)
    assert np.iscomplexobj(back)
    assert np.array_equal(back, values)
    assert box == 3.5


def test_rsf1_rejects_non_3d(tmp_path):
    with pytest.raises(ValueError, match="3-d"):
        write_field(tmp_path / "bad.rsf1", np.zeros((4, 4)), 1.0)


def test_rsf1_bad_magic(tmp_path):
    path = tmp_path / "bad.rsf1"
    write_field(path, np.zeros((4, 4, 4)), 1.0)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"XXXX"
    path.write_bytes(bytes(raw))
    with pytest.raises(ValueError, match="bad magic"):
        read_field(path)
    assert MAGIC == b"RSF1"


def test_rsf1_truncated_header(tmp_path):
    path = tmp_path / "short.rsf1"
    path.write_bytes(b"RSF1\x04")
    with pytest.raises(ValueError, match="truncated"):
        read_field(path)


def test_rsf1_wrong_payload_size(tmp_path):
    path = tmp_path / "bad_payload.rsf1"
    write_field(path, np.zeros((4, 4, 4)), 1.0)
    raw = path.read_bytes()
    path.write_bytes(raw[:-16])  # drop two doubles
    with pytest.raises(ValueError, match="payload"):
        read_field(path)
