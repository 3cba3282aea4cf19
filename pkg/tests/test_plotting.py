"""Tests for forecast figures (plotting.py)."""

import numpy as np
import pandas as pd
import pytest


class TestEmitPlot:
    """Test suite for emit_plot()."""

    def test_writes_svg_and_csv(self, tmp_path):
        """Both files are written next to each other."""
        from fredf.plotting import emit_plot

        svg, csv = emit_plot(
            np.linspace(0, 1, 8), np.zeros(8), tmp_path / "fig.svg"
        )

        assert svg.exists() and svg.suffix == ".svg"
        assert csv == tmp_path / "fig.csv"
        assert svg.read_text().lstrip().startswith(("<?xml", "<svg"))

    def test_csv_contents(self, tmp_path):
        """The CSV holds step, truth and one column per forecast."""
        from fredf.plotting import emit_plot

        _, csv = emit_plot(
            {"full": [1.0, 2.0], "masked": [3.0, 4.0]},
            [0.5, 0.25],
            tmp_path / "fig",
        )
        frame = pd.read_csv(csv)

        assert list(frame.columns) == ["step", "truth", "full", "masked"]
        assert frame["masked"].tolist() == [3.0, 4.0]

    def test_deterministic_svg(self, tmp_path):
        """The same data gives byte-identical SVG files."""
        from fredf.plotting import emit_plot

        pred = np.sin(np.arange(16))
        a, _ = emit_plot(pred, np.zeros(16), tmp_path / "a.svg", title="t")
        b, _ = emit_plot(pred, np.zeros(16), tmp_path / "b.svg", title="t")

        assert a.read_bytes() == b.read_bytes()

    def test_length_mismatch(self, tmp_path):
        """Forecast and truth must have the same length."""
        from fredf.errors import ShapeError
        from fredf.plotting import emit_plot

        with pytest.raises(ShapeError):
            emit_plot(np.zeros(3), np.zeros(4), tmp_path / "x.svg")

    def test_empty_series(self, tmp_path):
        """Empty series cannot be drawn."""
        from fredf.errors import ShapeError
        from fredf.plotting import emit_plot

        with pytest.raises(ShapeError):
            emit_plot([], [], tmp_path / "x.svg")
