"""Forecast-versus-truth figures.

Every figure comes with a CSV of the plotted points; the CSV is the
machine-readable record, the SVG is for people.
"""

from __future__ import annotations

from collections.abc import Mapping
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .errors import ShapeError  # noqa: E402

FIGSIZE = (8.0, 3.0)
TRUTH_COLOR = "#222222"
PREDICTION_COLORS = ("#d62728", "#1f77b4", "#2ca02c", "#9467bd")

# Fixed salt and no date metadata keep SVG bytes stable across runs.
SVG_RC = {"svg.hashsalt": "fredf", "svg.fonttype": "path"}


def _series(values, name: str) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise ShapeError(f"{name} must be 1-d, got shape {values.shape}")
    if values.size == 0:
        raise ShapeError(f"{name} is empty")
    return values


def emit_plot(
    predictions,
    truth,
    path: str | Path,
    title: str | None = None,
) -> tuple[Path, Path]:
    """Draw truth and one or more forecasts; write ``path`` and a CSV.

    ``predictions`` is one series or a mapping of label to series, all the
    same length as ``truth``. Returns the SVG and CSV paths.
    """
    truth = _series(truth, "truth")
    if not isinstance(predictions, Mapping):
        predictions = {"prediction": predictions}
    if not predictions:
        raise ShapeError("no predictions to plot")
    curves = {}
    for label, values in predictions.items():
        values = _series(values, f"prediction {label!r}")
        if values.shape != truth.shape:
            raise ShapeError(
                f"prediction {label!r} has {values.size} points, truth has "
                f"{truth.size}"
            )
        curves[str(label)] = values

    path = Path(path).with_suffix(".svg")
    path.parent.mkdir(parents=True, exist_ok=True)
    csv_path = path.with_suffix(".csv")

    frame = pd.DataFrame({"step": np.arange(truth.size), "truth": truth})
    for label, values in curves.items():
        frame[label] = values
    frame.to_csv(csv_path, index=False, float_format="%.10g")

    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=FIGSIZE)
        steps = frame["step"].to_numpy()
        ax.plot(steps, truth, color=TRUTH_COLOR, linewidth=1.5, label="truth")
        for i, (label, values) in enumerate(curves.items()):
            ax.plot(
                steps,
                values,
                color=PREDICTION_COLORS[i % len(PREDICTION_COLORS)],
                linewidth=1.2,
                label=label,
            )
        ax.set_xlabel("forecast step")
        ax.set_ylabel("value")
        if title:
            ax.set_title(title)
        ax.legend(loc="upper right", frameon=False)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path, csv_path
