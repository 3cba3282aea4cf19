"""pytest fixtures for fredf tests."""

import os

import numpy as np
import pytest


@pytest.fixture
def clean_env():
    """Remove dataset-related environment variables for clean test state."""
    env_vars = [
        "FREDF_DATASET",
        "FREDF_DATA_DIR",
    ]
    old_values = {}
    for var in env_vars:
        old_values[var] = os.environ.pop(var, None)

    yield

    # Restore original values
    for var, value in old_values.items():
        if value is not None:
            os.environ[var] = value
        elif var in os.environ:
            del os.environ[var]


@pytest.fixture
def tiny_config():
    """A model small enough for exhaustive gradient and operator checks."""
    from fredf.config import ModelConfig

    return ModelConfig(lookback=6, horizon=4, channels=2, dim=3, layers=2)


@pytest.fixture
def series_csv(tmp_path):
    """CSV file with a date column and two smooth channels, 240 rows."""
    t = np.arange(240)
    a = np.sin(2 * np.pi * t / 24) + 0.01 * t
    b = np.cos(2 * np.pi * t / 12) + 2.0
    lines = ["date,a,b"]
    for i in range(240):
        lines.append(f"2020-01-{1 + i // 24:02d} {i % 24:02d}:00,{a[i]:.10g},{b[i]:.10g}")
    path = tmp_path / "series.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
