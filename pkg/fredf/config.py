"""Configuration for fredf.

Options are traitlets ``Configurable`` classes, so they can be set from a
config file or the command line:

    c.ModelOptions.dim = 128
    c.TrainOptions.lr = 1e-3

    fredf train --dim=128 --lr=1e-3

Each options class resolves into a frozen dataclass snapshot that the
numerical code consumes.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, replace

import numpy as np
from traitlets import (
    Bool,
    Float,
    Int,
    List,
    TraitError,
    Unicode,
    default,
    validate,
)
from traitlets.config import Configurable

from .errors import ConfigError

# Defaults of the long-horizon benchmark protocol.
DEFAULT_LOOKBACK = 96
DEFAULT_HORIZON = 96
DEFAULT_DIM = 64
DEFAULT_LAYERS = 1
DEFAULT_LR = 1e-4
DEFAULT_BATCH_SIZE = 4
DEFAULT_EPOCHS = 10
DEFAULT_PATIENCE = 3
DEFAULT_SEED = 2024
DEFAULT_REPEATS = 3

# Horizons of the long-horizon benchmarks; any positive value is accepted.
HORIZONS = (96, 192, 336, 720)
BLOCK_MODES = ("fast", "naive")
PRECISIONS = ("float64", "float32")


class ModelOptions(Configurable):
    """Shape of the forecaster.

    Can be configured in a config file:
        c.ModelOptions.dim = 128
        c.ModelOptions.layers = 2
    """

    lookback = Int(
        DEFAULT_LOOKBACK, help="Lookback length T (input time steps)."
    ).tag(config=True)

    horizon = Int(
        DEFAULT_HORIZON,
        help=(
            "Prediction length S (forecast time steps). The benchmarks use "
            + ", ".join(map(str, HORIZONS))
            + "."
        ),
    ).tag(config=True)

    dim = Int(
        DEFAULT_DIM,
        help=(
            "Embedding dimension D. Set it equal to the number of channels "
            "to keep the series un-embedded."
        ),
    ).tag(config=True)

    layers = Int(DEFAULT_LAYERS, help="Number of FDBlocks L.").tag(
        config=True
    )

    dropout = Float(
        0.0,
        help=(
            "Dropout rate applied to the embedding and to every FDBlock "
            "output while training."
        ),
    ).tag(config=True)

    hidden = Int(
        0,
        help=(
            "Hidden width of the embedding and projection maps. 0 (the "
            "default) keeps both as single affine layers; a positive "
            "value inserts one tanh hidden layer."
        ),
    ).tag(config=True)

    block_mode = Unicode(
        "fast",
        help=(
            "FDBlock execution: 'fast' fuses weights in the spectrum before "
            "one inverse transform, 'naive' inverts every frequency and "
            "fuses in the time domain."
        ),
    ).tag(config=True)

    precision = Unicode(
        "float64", help="Floating point precision: 'float64' or 'float32'."
    ).tag(config=True)

    @validate("lookback", "horizon", "dim", "layers")
    def _validate_positive(self, proposal):
        value = proposal["value"]
        if value < 1:
            raise TraitError(
                f"{proposal['trait'].name} must be positive, got {value}"
            )
        return value

    @validate("hidden")
    def _validate_hidden(self, proposal):
        if proposal["value"] < 0:
            raise TraitError("hidden must be >= 0")
        return proposal["value"]

    @validate("dropout")
    def _validate_dropout(self, proposal):
        value = proposal["value"]
        if not 0.0 <= value < 1.0:
            raise TraitError(f"dropout must be in [0, 1), got {value}")
        return value

    @validate("block_mode")
    def _validate_block_mode(self, proposal):
        value = proposal["value"]
        if value not in BLOCK_MODES:
            raise TraitError(
                f"block_mode must be one of {BLOCK_MODES}, got {value!r}"
            )
        return value

    @validate("precision")
    def _validate_precision(self, proposal):
        value = proposal["value"]
        if value not in PRECISIONS:
            raise TraitError(
                f"precision must be one of {PRECISIONS}, got {value!r}"
            )
        return value


class TrainOptions(Configurable):
    """Optimizer and training-loop settings."""

    lr = Float(DEFAULT_LR, help="Adam learning rate.").tag(config=True)

    batch_size = Int(DEFAULT_BATCH_SIZE, help="Mini-batch size.").tag(
        config=True
    )

    max_epochs = Int(DEFAULT_EPOCHS, help="Upper bound on epochs.").tag(
        config=True
    )

    patience = Int(
        DEFAULT_PATIENCE,
        help="Epochs without validation improvement before stopping.",
    ).tag(config=True)

    seed = Int(DEFAULT_SEED, help="Base random seed.").tag(config=True)

    seeds = List(
        Int(),
        help=(
            "Explicit seed list. When empty, 'repeats' seeds counting up "
            "from 'seed' are used."
        ),
    ).tag(config=True)

    repeats = Int(
        DEFAULT_REPEATS, help="Number of seeds when 'seeds' is empty."
    ).tag(config=True)

    clip_norm = Float(
        default_value=None,
        allow_none=True,
        help="Clip the global gradient norm to this value. None disables.",
    ).tag(config=True)

    track_frequency_losses = Bool(
        True,
        help=(
            "Record per-frequency validation losses every epoch for the "
            "weight/loss diagnostics."
        ),
    ).tag(config=True)

    diagnostic_windows = Int(
        32,
        help="Validation windows used for per-frequency loss tracking.",
    ).tag(config=True)

    @validate("lr")
    def _validate_lr(self, proposal):
        if not proposal["value"] > 0:
            raise TraitError("lr must be positive")
        return proposal["value"]

    @validate("batch_size", "max_epochs", "patience", "repeats")
    def _validate_positive(self, proposal):
        value = proposal["value"]
        if value < 1:
            raise TraitError(
                f"{proposal['trait'].name} must be >= 1, got {value}"
            )
        return value


class DataOptions(Configurable):
    """Where the series comes from and how it is split."""

    dataset = Unicode(
        allow_none=True,
        help=(
            "CSV path, bare dataset name searched in the data directories, "
            "or 'synthetic' for the generated noise-band dataset."
        ),
    ).tag(config=True)

    split = List(
        Int(),
        help=(
            "Train, validation and test row counts. Empty uses the known "
            "split for the dataset name, else a 70/10/20 split."
        ),
    ).tag(config=True)

    raw_scale = Bool(
        False, help="Also report metrics on the original data scale."
    ).tag(config=True)

    synthetic_rows = Int(
        2400, help="Rows of the synthetic dataset."
    ).tag(config=True)

    synthetic_channels = Int(
        2, help="Channels of the synthetic dataset."
    ).tag(config=True)

    synthetic_snr = Float(
        1.0,
        help="Signal-to-noise power ratio of the synthetic dataset.",
    ).tag(config=True)

    synthetic_seed = Int(
        0,
        help=(
            "Seed of the synthetic dataset. Kept apart from the training "
            "seeds so every seed trains on the same series."
        ),
    ).tag(config=True)

    @validate("split")
    def _validate_split(self, proposal):
        value = proposal["value"]
        if value and (len(value) != 3 or min(value) < 0):
            raise TraitError(
                "split needs three non-negative row counts "
                f"(train, val, test), got {value}"
            )
        return value

    @default("dataset")
    def _default_dataset(self):
        return os.environ.get("FREDF_DATASET")


class RunOptions(Configurable):
    """What a command reads and where it writes."""

    out = Unicode("runs", help="Output directory.").tag(config=True)

    variant = Unicode(
        "full",
        help=(
            "Ablation variant: full, static_fusion, no_transfer, "
            "fuse_on_spectrum, band_mask:<low|mid|high|none>, layers."
        ),
    ).tag(config=True)

    checkpoint = Unicode(
        allow_none=True, help="Checkpoint file to load."
    ).tag(config=True)

    window = Int(
        0, help="Index of the test window to forecast or plot."
    ).tag(config=True)

    channel = Int(0, help="Channel drawn by the plot command.").tag(
        config=True
    )

    timings = Bool(
        False,
        help=(
            "Write wall-clock runtimes into reports. Off by default so "
            "reruns produce byte-identical files."
        ),
    ).tag(config=True)

    plot = Bool(
        False, help="Also write prediction plots where a command supports it."
    ).tag(config=True)

    @default("checkpoint")
    def _default_checkpoint(self):
        return None


@dataclass(frozen=True)
class ModelConfig:
    """Resolved model shape (immutable snapshot)."""

    lookback: int
    horizon: int
    channels: int
    dim: int
    layers: int = DEFAULT_LAYERS
    dropout: float = 0.0
    hidden: int = 0
    block_mode: str = "fast"
    precision: str = "float64"

    def __post_init__(self):
        for name in ("lookback", "horizon", "channels", "dim", "layers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if (self.lookback + self.horizon) % 2:
            raise ConfigError(
                "lookback + horizon must be even, got "
                f"{self.lookback} + {self.horizon}"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.hidden < 0:
            raise ConfigError("hidden must be >= 0")
        if self.block_mode not in BLOCK_MODES:
            raise ConfigError(f"unknown block_mode {self.block_mode!r}")
        if self.precision not in PRECISIONS:
            raise ConfigError(f"unknown precision {self.precision!r}")

    @property
    def length(self) -> int:
        """Zero-padded length T + S seen by the FDBlocks."""
        return self.lookback + self.horizon

    @property
    def bins(self) -> int:
        """K = (T + S) / 2 + 1."""
        return self.length // 2 + 1

    @property
    def dtype(self) -> type[np.floating]:
        return np.float32 if self.precision == "float32" else np.float64

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **changes) -> ModelConfig:
        return replace(self, **changes)


@dataclass(frozen=True)
class TrainConfig:
    """Resolved training settings (immutable snapshot)."""

    lr: float = DEFAULT_LR
    batch_size: int = DEFAULT_BATCH_SIZE
    max_epochs: int = DEFAULT_EPOCHS
    patience: int = DEFAULT_PATIENCE
    seed: int = DEFAULT_SEED
    repeats: int = DEFAULT_REPEATS
    clip_norm: float | None = None
    track_frequency_losses: bool = True
    diagnostic_windows: int = 32

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigError("lr must be positive")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ConfigError(
                "batch_size, max_epochs and patience must be >= 1"
            )
        if self.clip_norm is not None and not self.clip_norm > 0:
            raise ConfigError("clip_norm must be positive when set")

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **changes) -> TrainConfig:
        return replace(self, **changes)


def get_model_config(options: ModelOptions, channels: int) -> ModelConfig:
    """Resolve model options once the channel count is known."""
    return ModelConfig(
        lookback=options.lookback,
        horizon=options.horizon,
        channels=channels,
        dim=options.dim,
        layers=options.layers,
        dropout=options.dropout,
        hidden=options.hidden,
        block_mode=options.block_mode,
        precision=options.precision,
    )


def get_train_config(
    options: TrainOptions, seed: int | None = None
) -> TrainConfig:
    """Resolve training options, optionally overriding the seed."""
    return TrainConfig(
        lr=options.lr,
        batch_size=options.batch_size,
        max_epochs=options.max_epochs,
        patience=options.patience,
        seed=options.seed if seed is None else seed,
        repeats=options.repeats,
        clip_norm=options.clip_norm,
        track_frequency_losses=bool(options.track_frequency_losses),
        diagnostic_windows=options.diagnostic_windows,
    )


def seed_list(options: TrainOptions) -> list[int]:
    """Explicit seeds, or ``repeats`` seeds counting up from ``seed``."""
    if options.seeds:
        return list(options.seeds)
    return [options.seed + i for i in range(options.repeats)]
