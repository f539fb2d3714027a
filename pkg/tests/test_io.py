import json
import math

import numpy as np

from singular_yamabe._io import dumps, write_json


def test_floats_keep_17_digits():
    x = 0.1 + 0.2
    text = dumps({"x": x})
    assert "0.30000000000000004" in text
    assert json.loads(text)["x"] == x


def test_keys_sorted_and_numpy_converted():
    text = dumps({"b": np.float64(1.5), "a": np.arange(3), "c": np.bool_(True), "d": np.int32(4)})
    data = json.loads(text)
    assert list(data) == ["a", "b", "c", "d"]
    assert data == {"a": [0, 1, 2], "b": 1.5, "c": True, "d": 4}


def test_non_finite_become_null():
    data = json.loads(dumps({"a": math.nan, "b": [math.inf, 1.0]}))
    assert data == {"a": None, "b": [None, 1.0]}


def test_nested_structures_roundtrip(tmp_path):
    obj = {"rows": [{"k": 1, "v": [1.0, 2.0]}, {"k": 2, "v": []}], "empty": {}, "s": "x", "none": None}
    path = tmp_path / "o.json"
    write_json(path, obj)
    assert json.loads(path.read_text()) == obj
    assert path.read_text().endswith("\n")


def test_output_is_deterministic():
    obj = {"z": [0.1, 1 / 3], "a": {"y": 2.0 ** -40, "x": -0.5}}
    assert dumps(obj) == dumps(json.loads(dumps(obj)))
