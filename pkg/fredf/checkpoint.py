"""Parameter checkpoints.

A checkpoint is a zip archive holding ``meta.json`` (format name, version,
model config, channel names, normalization statistics and tensor order)
and one ``<name>.npy`` member per tensor, little-endian and C-ordered.
Members carry a fixed timestamp, so saving the same parameters twice
gives identical bytes.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ModelConfig
from .data import NormStats
from .errors import CheckpointError, ConfigError
from .model import ParameterSet, parameter_shapes

FORMAT = "fredf-checkpoint"
VERSION = 1
META = "meta.json"
_EPOCH = (1980, 1, 1, 0, 0, 0)


@dataclass(frozen=True)
class Checkpoint:
    params: ParameterSet
    config: ModelConfig
    channels: tuple[str, ...]
    stats: NormStats | None = None
    history: dict | None = None


def _member(name: str) -> zipfile.ZipInfo:
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    return info


def _array_bytes(value: np.ndarray) -> bytes:
    value = np.ascontiguousarray(value)
    value = value.astype(value.dtype.newbyteorder("<"), copy=False)
    buf = io.BytesIO()
    np.lib.format.write_array(buf, value, allow_pickle=False)
    return buf.getvalue()


def save_checkpoint(
    path: str | Path,
    params: ParameterSet,
    config: ModelConfig,
    channels: tuple[str, ...] | list[str],
    stats: NormStats | None = None,
    history: dict | None = None,
) -> Path:
    """Write ``params`` and everything needed to rebuild the model.

    ``history`` (for example the fusion and per-frequency loss
    trajectories of the run) is stored in the metadata as given.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "format": FORMAT,
        "version": VERSION,
        "config": config.to_dict(),
        "channels": list(channels),
        "norm": stats.to_dict() if stats is not None else None,
        "history": history,
        "tensors": list(params),
        "byte_order": "little",
        "layout": "C",
    }
    with zipfile.ZipFile(path, "w") as archive:
        archive.writestr(
            _member(META), json.dumps(meta, sort_keys=True, indent=2)
        )
        for name, value in params.items():
            archive.writestr(_member(f"{name}.npy"), _array_bytes(value))
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Read a checkpoint written by :func:`save_checkpoint`."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint {path} not found")
    try:
        with zipfile.ZipFile(path) as archive:
            meta = json.loads(archive.read(META))
            _check_meta(meta, path)
            tensors = {
                name: np.lib.format.read_array(
                    io.BytesIO(archive.read(f"{name}.npy")),
                    allow_pickle=False,
                )
                for name in meta["tensors"]
            }
    except (zipfile.BadZipFile, KeyError, ValueError) as err:
        raise CheckpointError(
            f"{path}: unreadable checkpoint ({err})"
        ) from err

    try:
        config = ModelConfig(**meta["config"])
    except (TypeError, ConfigError) as err:
        raise CheckpointError(f"{path}: bad model config ({err})") from err
    expected = parameter_shapes(config)
    shapes = {name: value.shape for name, value in tensors.items()}
    if shapes != expected:
        raise CheckpointError(
            f"{path}: tensors {shapes} do not match config {expected}"
        )
    native = {
        name: value.astype(value.dtype.newbyteorder("="))
        for name, value in tensors.items()
    }
    norm = meta.get("norm")
    stats = NormStats.from_dict(norm) if norm else None
    return Checkpoint(
        ParameterSet(native),
        config,
        tuple(meta["channels"]),
        stats,
        meta.get("history"),
    )


def _check_meta(meta: dict, path: Path) -> None:
    if meta.get("format") != FORMAT:
        raise CheckpointError(f"{path}: not a fredf checkpoint")
    if meta.get("version") != VERSION:
        raise CheckpointError(
            f"{path}: checkpoint version {meta.get('version')} is not "
            f"supported (expected {VERSION})"
        )
