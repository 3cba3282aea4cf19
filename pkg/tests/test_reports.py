"""Tests for JSON report files (reports.py)."""

import json
from pathlib import Path

import numpy as np


class TestWriteJson:
    """Test suite for dumps() and write_json()."""

    def test_numpy_and_paths_become_plain(self):
        """numpy scalars, arrays and paths are written as JSON values."""
        from fredf.reports import dumps

        out = json.loads(
            dumps(
                {
                    "a": np.float64(1.5),
                    "b": np.arange(3),
                    "c": Path("x/y"),
                    "d": (1, 2),
                }
            )
        )

        assert out == {"a": 1.5, "b": [0, 1, 2], "c": "x/y", "d": [1, 2]}

    def test_non_finite_becomes_null(self):
        """NaN and inf are written as null."""
        from fredf.reports import dumps

        out = json.loads(dumps({"x": float("nan"), "y": [np.inf]}))

        assert out == {"x": None, "y": [None]}

    def test_stable_bytes(self, tmp_path):
        """Keys are sorted and the file ends with a newline."""
        from fredf.reports import write_json

        a = write_json(tmp_path / "a.json", {"b": 1, "a": 2})
        b = write_json(tmp_path / "sub" / "b.json", {"a": 2, "b": 1})

        assert a.read_bytes() == b.read_bytes()
        assert a.read_text().endswith("}\n")
        assert a.read_text().index('"a"') < a.read_text().index('"b"')
