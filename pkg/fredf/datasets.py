"""Dataset discovery for fredf."""

import os
from pathlib import Path

SYNTHETIC = "synthetic"

COMMON_LOCATIONS = [
    "./dataset",
    "./data",
    "~/.cache/fredf/datasets",
]


def resolve_dataset(name: str | None) -> Path | str:
    """Find the CSV file for a dataset argument.

    Args:
        name: a path, a bare dataset name such as ``ETTh1``, or
            ``synthetic``

    Logic:
    - ``synthetic`` → returned as is; the caller generates the series
    - an existing file → used directly
    - otherwise → search $FREDF_DATA_DIR and the common locations for
      ``name`` and ``name.csv``
    - if not found → raise FileNotFoundError

    Returns:
        Path of the CSV file, or the string ``"synthetic"``
    """
    if not name:
        raise FileNotFoundError(
            "no dataset given.\n"
            "Solutions:\n"
            "  - Pass --dataset=path/to/series.csv\n"
            "  - Set the FREDF_DATASET environment variable\n"
            "  - Use --dataset=synthetic for the generated noise-band series"
        )
    if name == SYNTHETIC:
        return SYNTHETIC

    candidate = Path(name).expanduser()
    if candidate.is_file():
        return candidate

    if found := _find_dataset(name):
        return found

    raise FileNotFoundError(
        f"dataset {name!r} not found.\n"
        "Solutions:\n"
        "  - Pass the full path to the CSV file\n"
        "  - Put the file in ./dataset, ./data or ~/.cache/fredf/datasets\n"
        "  - Set FREDF_DATA_DIR to the directory holding the file"
    )


def _search_dirs() -> list[Path]:
    dirs = []
    if env := os.environ.get("FREDF_DATA_DIR"):
        dirs.append(Path(env).expanduser())
    dirs.extend(Path(location).expanduser() for location in COMMON_LOCATIONS)
    return dirs


def _find_dataset(name: str) -> Path | None:
    """Search the data directories for ``name`` or ``name.csv``."""
    names = [name]
    if not name.endswith(".csv"):
        names.append(f"{name}.csv")
    for directory in _search_dirs():
        for candidate_name in names:
            candidate = directory / candidate_name
            if candidate.exists() and candidate.is_file():
                return candidate
    return None
