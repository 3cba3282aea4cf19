"""Series ingestion, chronological splits, z-scoring and windows.

Every window is cut from inside one split, so no training window shares a
row with a validation or test window. Normalization statistics always
come from the training split.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from . import numerics as nx
from . import spectral
from .errors import (
    ConfigError,
    IngestionError,
    NormalizationError,
    ShapeError,
    SplitError,
)
from .spectral import BandSpec

# Row counts (train, val, test) of the public long-horizon benchmarks.
KNOWN_SPLITS: dict[str, tuple[int, int, int]] = {
    "etth1": (8545, 2881, 2881),
    "etth2": (8545, 2881, 2881),
    "ettm1": (34465, 11521, 11521),
    "ettm2": (34465, 11521, 11521),
    "exchange_rate": (5120, 665, 1422),
    "exchange": (5120, 665, 1422),
    "weather": (36792, 5271, 10540),
    "electricity": (18317, 2633, 5261),
    "ecl": (18317, 2633, 5261),
    "solar_al": (36601, 5161, 10417),
    "solar": (36601, 5161, 10417),
}

TRAIN_RATIO = 0.7
TEST_RATIO = 0.2

TIMESTAMP_NAMES = ("date", "datetime", "timestamp", "time")


@dataclass(frozen=True)
class SeriesTable:
    """Multichannel series, rows in time order.

    ``offset`` is the row index of the first row in the table it was cut
    from, so window origins stay comparable across splits.
    """

    values: np.ndarray
    channels: tuple[str, ...]
    timestamps: tuple[str, ...] | None = None
    offset: int = 0

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ShapeError(f"values must be (rows, C), got {self.shape}")
        if len(self.channels) != self.values.shape[1]:
            raise ShapeError(
                f"{len(self.channels)} channel names for "
                f"{self.values.shape[1]} columns"
            )
        if (
            self.timestamps is not None
            and len(self.timestamps) != self.values.shape[0]
        ):
            raise ShapeError("timestamps and values differ in length")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def slice(self, start: int, stop: int) -> SeriesTable:
        stamps = None
        if self.timestamps is not None:
            stamps = self.timestamps[start:stop]
        return SeriesTable(
            self.values[start:stop],
            self.channels,
            stamps,
            self.offset + start,
        )

    def with_values(self, values: np.ndarray) -> SeriesTable:
        return replace(self, values=values)


@dataclass(frozen=True)
class CsvSchema:
    """How to read a CSV file.

    ``timestamp`` names the timestamp column, ``"auto"`` takes the first
    column when it is called date/time-like or does not parse as a number,
    and ``None`` reads every column as a channel.
    """

    timestamp: str | None = "auto"
    delimiter: str = ","


def _timestamp_column(frame: pd.DataFrame, schema: CsvSchema) -> str | None:
    if schema.timestamp is None:
        return None
    if schema.timestamp != "auto":
        if schema.timestamp not in frame.columns:
            raise IngestionError(
                f"timestamp column {schema.timestamp!r} not in header"
            )
        return schema.timestamp
    first = frame.columns[0]
    if str(first).strip().lower() in TIMESTAMP_NAMES:
        return first
    cell = frame[first].iloc[0]
    if pd.isna(pd.to_numeric(pd.Series([cell]), errors="coerce")[0]):
        return first
    return None


def _decode_failure(path: Path, delimiter: str) -> str:
    raw = path.read_bytes()
    try:
        raw.decode("utf-8")
    except UnicodeDecodeError as err:
        line = raw.count(b"\n", 0, err.start) + 1
        start = raw.rfind(b"\n", 0, err.start) + 1
        field = raw.count(delimiter.encode(), start, err.start) + 1
        return (
            f"{path}: invalid UTF-8 byte {raw[err.start]:#04x} at line "
            f"{line}, field {field}"
        )
    return f"{path}: not valid UTF-8"


def load_csv(path: str | Path, schema: CsvSchema | None = None) -> SeriesTable:
    """Read a UTF-8 CSV file with a header row into a SeriesTable.

    Cells that are missing, empty or not numbers are ingestion errors
    naming the file line and column.
    """
    schema = schema or CsvSchema()
    path = Path(path)
    try:
        frame = pd.read_csv(
            path,
            sep=schema.delimiter,
            dtype=str,
            keep_default_na=False,
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError:
        raise IngestionError(f"{path}: file is empty") from None
    except pd.errors.ParserError as err:
        raise IngestionError(f"{path}: ragged rows ({err})") from None
    except UnicodeDecodeError:
        raise IngestionError(_decode_failure(path, schema.delimiter)) from None
    if frame.empty:
        raise IngestionError(f"{path}: header but no data rows")

    stamp_col = _timestamp_column(frame, schema)
    value_cols = [c for c in frame.columns if c != stamp_col]
    if not value_cols:
        raise IngestionError(f"{path}: no value columns")

    values = np.empty((len(frame), len(value_cols)), dtype=np.float64)
    for j, column in enumerate(value_cols):
        raw = frame[column]
        missing = raw.isna() | (raw.str.strip() == "")
        if missing.any():
            row = int(np.argmax(missing.to_numpy()))
            raise IngestionError(
                f"{path}: missing value at line {row + 2}, column "
                f"{column!r}"
            )
        parsed = pd.to_numeric(raw.str.strip(), errors="coerce")
        bad = parsed.isna().to_numpy()
        if bad.any():
            row = int(np.argmax(bad))
            raise IngestionError(
                f"{path}: non-numeric cell {raw.iloc[row]!r} at line "
                f"{row + 2}, column {column!r}"
            )
        values[:, j] = parsed.to_numpy(dtype=np.float64)
    if not np.all(np.isfinite(values)):
        row, col = np.argwhere(~np.isfinite(values))[0]
        raise IngestionError(
            f"{path}: non-finite value at line {row + 2}, column "
            f"{value_cols[col]!r}"
        )

    stamps = None
    if stamp_col is not None:
        stamps = tuple(frame[stamp_col].tolist())
    return SeriesTable(values, tuple(str(c) for c in value_cols), stamps)


@dataclass(frozen=True)
class SplitSpec:
    """Row counts of the train, validation and test segments."""

    train: int
    val: int
    test: int

    def __post_init__(self):
        if min(self.train, self.val, self.test) < 0:
            raise SplitError(f"negative segment length in {self}")

    @property
    def total(self) -> int:
        return self.train + self.val + self.test


def split_for(name: str | None, rows: int) -> SplitSpec:
    """Published split for a known dataset name, else 70/10/20."""
    key = Path(name).stem.lower() if name else ""
    known = KNOWN_SPLITS.get(key)
    if known is not None and sum(known) <= rows:
        return SplitSpec(*known)
    train = int(rows * TRAIN_RATIO)
    test = int(rows * TEST_RATIO)
    return SplitSpec(train, rows - train - test, test)


def chronological_split(
    table: SeriesTable, spec: SplitSpec
) -> tuple[SeriesTable, SeriesTable, SeriesTable]:
    """Cut ``table`` into three adjacent segments, in time order."""
    if spec.total > table.rows:
        raise SplitError(
            f"split {spec.train}/{spec.val}/{spec.test} needs {spec.total} "
            f"rows, table has {table.rows}"
        )
    a = spec.train
    b = a + spec.val
    c = b + spec.test
    return table.slice(0, a), table.slice(a, b), table.slice(b, c)


@dataclass(frozen=True)
class NormStats:
    """Per-channel mean and standard deviation."""

    mean: np.ndarray
    std: np.ndarray

    def apply(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if values.shape[-1] != self.mean.shape[0]:
            raise ShapeError(
                f"{values.shape[-1]} channels, stats for {self.mean.shape[0]}"
            )
        return (values - self.mean) / self.std

    def invert(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if values.shape[-1] != self.mean.shape[0]:
            raise ShapeError(
                f"{values.shape[-1]} channels, stats for {self.mean.shape[0]}"
            )
        return values * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> NormStats:
        return cls(
            np.asarray(data["mean"], dtype=np.float64),
            np.asarray(data["std"], dtype=np.float64),
        )


def fit_zscore(train: SeriesTable) -> NormStats:
    """Mean and population standard deviation of every channel."""
    if train.rows == 0:
        raise NormalizationError("cannot fit statistics on zero rows")
    mean = train.values.mean(axis=0)
    std = train.values.std(axis=0)
    flat = np.flatnonzero(std == 0)
    if flat.size:
        names = [train.channels[i] for i in flat]
        raise NormalizationError(f"constant channel(s) {names}")
    return NormStats(mean, std)


def apply_zscore(table: SeriesTable, stats: NormStats) -> SeriesTable:
    return table.with_values(stats.apply(table.values))


def invert_zscore(table: SeriesTable, stats: NormStats) -> SeriesTable:
    return table.with_values(stats.invert(table.values))


@dataclass(frozen=True)
class WindowPair:
    """Input rows ``x`` (T, C) followed directly by target rows ``y``."""

    x: np.ndarray
    y: np.ndarray
    origin: int


@dataclass(frozen=True)
class WindowBatch:
    """Stacked windows: ``x`` (B, T, C), ``y`` (B, S, C), ``origins``."""

    x: np.ndarray
    y: np.ndarray
    origins: np.ndarray

    def __len__(self) -> int:
        return len(self.x)

    def take(self, index) -> WindowBatch:
        return WindowBatch(
            self.x[index], self.y[index], self.origins[index]
        )

    def head(self, n: int) -> WindowBatch:
        return self.take(slice(0, n))

    def pairs(self) -> Iterator[WindowPair]:
        for x, y, origin in zip(self.x, self.y, self.origins):
            yield WindowPair(x, y, int(origin))


def _check_window(table: SeriesTable, lookback: int, horizon: int) -> None:
    if lookback < 1 or horizon < 1:
        raise ShapeError("lookback and horizon must be positive")
    if table.rows < lookback + horizon:
        raise ShapeError(
            f"series of {table.rows} rows is shorter than lookback + "
            f"horizon = {lookback + horizon}"
        )


def make_windows(
    table: SeriesTable, lookback: int, horizon: int
) -> Iterator[WindowPair]:
    """Every (input, target) pair, one per start row, in time order."""
    _check_window(table, lookback, horizon)
    count = table.rows - lookback - horizon + 1

    def _pairs():
        for start in range(count):
            mid = start + lookback
            yield WindowPair(
                table.values[start:mid],
                table.values[mid : mid + horizon],
                table.offset + start,
            )

    return _pairs()


def window_batch(
    table: SeriesTable, lookback: int, horizon: int
) -> WindowBatch:
    """All windows of ``table`` stacked into arrays."""
    _check_window(table, lookback, horizon)
    view = sliding_window_view(table.values, lookback + horizon, axis=0)
    view = np.swapaxes(view, 1, 2)
    return WindowBatch(
        np.ascontiguousarray(view[:, :lookback]),
        np.ascontiguousarray(view[:, lookback:]),
        table.offset + np.arange(view.shape[0]),
    )


def stack_windows(pairs: Iterable[WindowPair]) -> WindowBatch:
    pairs = list(pairs)
    if not pairs:
        raise ShapeError("no windows to stack")
    return WindowBatch(
        np.stack([p.x for p in pairs]),
        np.stack([p.y for p in pairs]),
        np.array([p.origin for p in pairs]),
    )


def _mask_inputs(x: np.ndarray, band: BandSpec) -> np.ndarray:
    return spectral.irdft(spectral.band_zero(spectral.rdft(x), band))


def mask_band_inputs(
    pairs: Iterable[WindowPair], band: BandSpec
) -> Iterator[WindowPair]:
    """Remove ``band`` from every input window; targets are untouched.

    Bins index the spectrum of the T-row input, T / 2 + 1 of them.
    """
    for pair in pairs:
        yield WindowPair(_mask_inputs(pair.x, band), pair.y, pair.origin)


def mask_band_batch(batch: WindowBatch, band: BandSpec) -> WindowBatch:
    return WindowBatch(_mask_inputs(batch.x, band), batch.y, batch.origins)


def input_band(name: str, lookback: int) -> BandSpec:
    """Named third of the input-window spectrum."""
    nx.check_even(lookback)
    return spectral.named_band(name, lookback // 2 + 1)


@dataclass(frozen=True)
class ExperimentData:
    """Windowed, z-scored splits of one series."""

    train: WindowBatch
    val: WindowBatch
    test: WindowBatch
    stats: NormStats
    channels: tuple[str, ...]
    split: SplitSpec


def prepare_experiment(
    table: SeriesTable,
    split: SplitSpec,
    lookback: int,
    horizon: int,
    band: str | BandSpec | None = None,
) -> ExperimentData:
    """Split, fit z-scores on train, window every split.

    ``band`` (a name or a BandSpec over the input spectrum) masks the
    inputs of all three splits.
    """
    train, val, test = chronological_split(table, split)
    stats = fit_zscore(train)
    batches = [
        window_batch(apply_zscore(part, stats), lookback, horizon)
        for part in (train, val, test)
    ]
    if isinstance(band, str):
        band = None if band == "none" else input_band(band, lookback)
    if band is not None:
        batches = [mask_band_batch(b, band) for b in batches]
    return ExperimentData(*batches, stats, table.channels, split)


# -- synthetic noise-band series -------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a series whose information sits in a known band.

    Each channel is a sum of ``sinusoids_per_band`` sinusoids whose
    frequencies are bins of the ``window``-row spectrum inside
    ``signal_band``, with random amplitude and phase, plus white noise
    confined to the frequencies of ``noise_band`` and scaled so that
    signal power / noise power equals ``snr``. ``snr=inf`` gives no
    noise. Bands are named thirds of the ``window``-row spectrum.
    """

    rows: int = 2400
    channels: int = 2
    window: int = 96
    signal_band: str = "low"
    noise_band: str = "high"
    snr: float = 1.0
    sinusoids_per_band: int = 3

    def __post_init__(self):
        if self.rows < 2 or self.rows % 2:
            raise ConfigError(f"rows must be even and >= 2, got {self.rows}")
        if self.channels < 1 or self.sinusoids_per_band < 1:
            raise ConfigError("channels and sinusoids_per_band must be >= 1")
        if self.window < 6 or self.window % 2:
            raise ConfigError(
                f"window must be even and >= 6, got {self.window}"
            )
        if not self.snr > 0:
            raise ConfigError("snr must be positive")

    @property
    def bins(self) -> int:
        return self.window // 2 + 1


def rescale_band(band: BandSpec, n_from: int, n_to: int) -> BandSpec:
    """The bins of an ``n_to``-row spectrum covering ``band``'s frequencies.

    ``band`` indexes an ``n_from``-row spectrum. The stop bin is clamped to
    the ``n_to`` spectrum.
    """
    lo = math.ceil(band.lo * n_to / n_from)
    hi = min(math.ceil(band.hi * n_to / n_from), n_to // 2 + 1)
    return BandSpec(lo, max(hi, lo + 1))


@dataclass(frozen=True)
class SyntheticComponents:
    signal: np.ndarray
    noise: np.ndarray
    signal_bins: tuple[int, ...]


def synthetic_components(
    seed: int, spec: SyntheticSpec
) -> SyntheticComponents:
    """The deterministic and noise parts of the synthetic series."""
    rng = nx.counter_rng(seed, 3)
    signal_band = spectral.named_band(spec.signal_band, spec.bins)
    candidates = np.arange(max(signal_band.lo, 1), signal_band.hi)
    if candidates.size == 0:
        raise ConfigError(f"signal band {signal_band} has no non-DC bins")
    count = min(spec.sinusoids_per_band, candidates.size)
    chosen = np.sort(rng.choice(candidates, size=count, replace=False))

    t = np.arange(spec.rows)[:, None]
    amplitude = rng.uniform(0.5, 1.5, size=(count, spec.channels))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=(count, spec.channels))
    signal = np.zeros((spec.rows, spec.channels))
    for i, k in enumerate(chosen):
        angle = 2.0 * np.pi * k * t / spec.window + phase[i]
        signal += amplitude[i] * np.sin(angle)

    noise = np.zeros_like(signal)
    if not math.isinf(spec.snr):
        white = rng.standard_normal((spec.rows, spec.channels))
        band = rescale_band(
            spectral.named_band(spec.noise_band, spec.bins),
            spec.window,
            spec.rows,
        )
        spectrum = spectral.rdft(white)
        full = spectrum.bins
        if band.lo > 0:
            spectrum = spectral.band_zero(spectrum, BandSpec(0, band.lo))
        if band.hi < full:
            spectrum = spectral.band_zero(spectrum, BandSpec(band.hi, full))
        noise = spectral.irdft(spectrum)
        power = np.mean(noise**2, axis=0)
        target = np.mean(signal**2, axis=0) / spec.snr
        noise = noise * np.sqrt(target / power)
    return SyntheticComponents(signal, noise, tuple(chosen.tolist()))


def synthetic_band_dataset(
    seed: int, spec: SyntheticSpec | None = None
) -> SeriesTable:
    """Generated series with signal in one band and noise in another."""
    spec = spec or SyntheticSpec()
    parts = synthetic_components(seed, spec)
    names = tuple(f"ch{i}" for i in range(spec.channels))
    return SeriesTable(parts.signal + parts.noise, names)
