"""Metrics, ablation runs and the weight/loss diagnostics."""

from __future__ import annotations

import logging
import time
from collections.abc import Iterable, Sequence
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from . import data as fd
from . import model, spectral
from . import numerics as nx
from .config import ModelConfig, TrainConfig
from .data import ExperimentData, NormStats, WindowBatch
from .errors import ContractError, ShapeError
from .model import ParameterSet
from .training import EVAL_CHUNK, TrainReport, train

logger = logging.getLogger(__name__)

VARIANTS = ("full", "static_fusion", "no_transfer", "fuse_on_spectrum")
MASK_TASKS = ("all", "low", "mid", "high")


@dataclass(frozen=True)
class MetricPair:
    """Test MSE and MAE, on the normalized scale unless ``raw_*``."""

    mse: float
    mae: float
    horizon: int
    dataset: str = ""
    seeds: tuple[int, ...] = ()
    raw_mse: float | None = None
    raw_mae: float | None = None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["seeds"] = list(self.seeds)
        return out


def evaluate(
    params: ParameterSet,
    windows: WindowBatch,
    mcfg: ModelConfig,
    stats: NormStats | None = None,
    dataset: str = "",
    seeds: Sequence[int] = (),
) -> MetricPair:
    """Mean MSE and MAE over every window.

    With ``stats`` the metrics are also computed after undoing the
    z-scoring of both forecast and target.
    """
    if len(windows) == 0:
        raise ShapeError("cannot evaluate an empty window set")
    sq = ab = 0.0
    raw_sq = raw_ab = 0.0
    count = 0
    for start in range(0, len(windows), EVAL_CHUNK):
        x = windows.x[start : start + EVAL_CHUNK]
        y = np.asarray(windows.y[start : start + EVAL_CHUNK], np.float64)
        pred = model.forward(x, params, mcfg).astype(np.float64)
        sq += float(np.sum((pred - y) ** 2))
        ab += float(np.sum(np.abs(pred - y)))
        if stats is not None:
            diff = stats.invert(pred) - stats.invert(y)
            raw_sq += float(np.sum(diff**2))
            raw_ab += float(np.sum(np.abs(diff)))
        count += y.size
    raw_mse = raw_mae = None
    if stats is not None:
        raw_mse, raw_mae = raw_sq / count, raw_ab / count
    return MetricPair(
        mse=sq / count,
        mae=ab / count,
        horizon=mcfg.horizon,
        dataset=dataset,
        seeds=tuple(seeds),
        raw_mse=raw_mse,
        raw_mae=raw_mae,
    )


def mean_metrics(pairs: Sequence[MetricPair]) -> MetricPair:
    """Average metrics over repeated seeds."""
    if not pairs:
        raise ContractError("no metrics to average")

    def _mean(name):
        values = [getattr(p, name) for p in pairs]
        if any(v is None for v in values):
            return None
        return float(np.mean(values))

    seeds = tuple(s for p in pairs for s in p.seeds)
    return MetricPair(
        mse=_mean("mse"),
        mae=_mean("mae"),
        horizon=pairs[0].horizon,
        dataset=pairs[0].dataset,
        seeds=seeds,
        raw_mse=_mean("raw_mse"),
        raw_mae=_mean("raw_mae"),
    )


@dataclass(frozen=True)
class AblationSpec:
    """One model variant.

    ``static_fusion`` freezes every fusion weight at one, ``no_transfer``
    freezes every transfer matrix at the identity, ``fuse_on_spectrum``
    runs the spectrum-fused block against a per-frequency baseline and
    ``band_mask:<band>`` masks one input band of every split.
    """

    variant: str = "full"

    def __post_init__(self):
        if self.variant in VARIANTS:
            return
        kind, _, band = self.variant.partition(":")
        if kind != "band_mask" or band not in (*spectral.BAND_NAMES, "none"):
            raise ContractError(
                f"unknown variant {self.variant!r}; expected one of "
                f"{VARIANTS} or band_mask:<low|mid|high|none>"
            )

    @property
    def band(self) -> str | None:
        kind, _, band = self.variant.partition(":")
        if kind != "band_mask" or band == "none":
            return None
        return band

    @property
    def frozen(self) -> frozenset[str]:
        if self.variant == "static_fusion":
            return frozenset({"fusion"})
        if self.variant == "no_transfer":
            return frozenset({"bank_re", "bank_im"})
        return frozenset()

    def model_config(self, mcfg: ModelConfig) -> ModelConfig:
        if self.variant == "fuse_on_spectrum":
            return mcfg.replace(block_mode="fast")
        return mcfg

    def baseline_config(self, mcfg: ModelConfig) -> ModelConfig:
        """Config of the full model this variant is paired with."""
        if self.variant == "fuse_on_spectrum":
            return mcfg.replace(block_mode="naive")
        return mcfg

    def initial_parameters(self, mcfg: ModelConfig, seed: int):
        params = model.init_parameters(mcfg, seed)
        if self.variant == "no_transfer":
            params = model.identity_bank(params)
        elif self.variant == "static_fusion":
            params = params.replace(fusion=np.ones_like(params["fusion"]))
        return params

    def apply_to(self, data: ExperimentData) -> ExperimentData:
        """Mask the inputs of every split when this is a band variant."""
        if self.band is None:
            return data
        lookback = data.train.x.shape[1]
        band = fd.input_band(self.band, lookback)
        return ExperimentData(
            fd.mask_band_batch(data.train, band),
            fd.mask_band_batch(data.val, band),
            fd.mask_band_batch(data.test, band),
            data.stats,
            data.channels,
            data.split,
        )


@dataclass
class RunResult:
    params: ParameterSet
    report: TrainReport
    metrics: MetricPair
    runtime: float
    config: ModelConfig


@dataclass(frozen=True)
class FittedModel:
    """A trained model and the test windows it was scored on."""

    params: ParameterSet
    config: ModelConfig
    test: WindowBatch

    def forecast(self, index: int) -> np.ndarray:
        return model.forward(self.test.x[index], self.params, self.config)


def fit_variant(
    spec: AblationSpec,
    data: ExperimentData,
    mcfg: ModelConfig,
    tcfg: TrainConfig,
    dataset: str = "",
    baseline: bool = False,
    log: logging.Logger | None = None,
) -> RunResult:
    """Train one variant (or its paired full model) and score it on test.

    The band mask is applied by the caller through
    :meth:`AblationSpec.apply_to`.
    """
    started = time.perf_counter()
    if baseline:
        cfg = spec.baseline_config(mcfg)
        init = model.init_parameters(cfg, tcfg.seed)
        frozen: frozenset[str] = frozenset()
    else:
        cfg = spec.model_config(mcfg)
        init = spec.initial_parameters(cfg, tcfg.seed)
        frozen = spec.frozen
    params, report = train(
        data.train, data.val, tcfg, cfg, frozen=frozen, init=init, log=log
    )
    metrics = evaluate(
        params, data.test, cfg, dataset=dataset, seeds=(tcfg.seed,)
    )
    return RunResult(
        params, report, metrics, time.perf_counter() - started, cfg
    )


def _row(dataset, horizon, seed, metrics, runtime, timings, **extra):
    row = {
        "dataset": dataset,
        "horizon": horizon,
        "seed": seed,
        "mse": metrics.mse,
        "mae": metrics.mae,
        "runtime": runtime if timings else None,
    }
    row.update(extra)
    return row


@dataclass
class ExperimentReport:
    """Rows of one comparative experiment and their per-group means."""

    kind: str
    rows: list[dict] = field(default_factory=list)
    group_by: str = "variant"
    # First-seed model per group; not part of the written report.
    fits: dict[str, FittedModel] = field(
        default_factory=dict, repr=False, compare=False
    )

    def keep(self, label, result: RunResult, test: WindowBatch) -> None:
        self.fits.setdefault(
            str(label), FittedModel(result.params, result.config, test)
        )

    def forecasts(self, index: int) -> dict[str, np.ndarray]:
        """(S, C) forecast of test window ``index`` for every group."""
        if not self.fits:
            raise ContractError(f"{self.kind}: no trained models kept")
        size = min(len(fit.test) for fit in self.fits.values())
        if not 0 <= index < size:
            raise ContractError(
                f"window {index} outside [0, {size}) test windows"
            )
        return {
            label: fit.forecast(index) for label, fit in self.fits.items()
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)

    def summary(self) -> list[dict]:
        """Mean MSE/MAE per group, in first-seen group order."""
        if not self.rows:
            return []
        frame = self.to_frame()
        grouped = frame.groupby(self.group_by, sort=False)
        means = grouped[["mse", "mae"]].mean()
        seeds = grouped["seed"].apply(list)
        return [
            {
                self.group_by: key,
                "mse": float(means.loc[key, "mse"]),
                "mae": float(means.loc[key, "mae"]),
                "seeds": [int(s) for s in seeds.loc[key]],
            }
            for key in means.index
        ]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "rows": self.rows,
            "summary": self.summary(),
        }


def run_ablation(
    spec: AblationSpec,
    data: ExperimentData,
    mcfg: ModelConfig,
    tcfg: TrainConfig,
    seeds: Iterable[int],
    dataset: str = "",
    timings: bool = False,
    log: logging.Logger | None = None,
) -> ExperimentReport:
    """Train the variant and the full model on identical seeds and data."""
    log = log or logger
    report = ExperimentReport(kind="ablation")
    variant_data = spec.apply_to(data)
    for seed in seeds:
        cfg = tcfg.replace(seed=seed)
        log.info("seed %d: full model", seed)
        full = fit_variant(spec, data, mcfg, cfg, dataset, True, log)
        report.keep("full", full, data.test)
        report.rows.append(
            _row(
                dataset,
                mcfg.horizon,
                seed,
                full.metrics,
                full.runtime,
                timings,
                variant="full",
            )
        )
        if spec.variant == "full":
            continue
        log.info("seed %d: %s", seed, spec.variant)
        result = fit_variant(
            spec, variant_data, mcfg, cfg, dataset, False, log
        )
        report.keep(spec.variant, result, variant_data.test)
        report.rows.append(
            _row(
                dataset,
                mcfg.horizon,
                seed,
                result.metrics,
                result.runtime,
                timings,
                variant=spec.variant,
            )
        )
    return report


def run_mask_experiment(
    data: ExperimentData,
    mcfg: ModelConfig,
    tcfg: TrainConfig,
    seeds: Iterable[int],
    dataset: str = "",
    timings: bool = False,
    log: logging.Logger | None = None,
) -> ExperimentReport:
    """Train on all frequencies, then without each input band in turn."""
    log = log or logger
    report = ExperimentReport(kind="mask-experiment", group_by="task")
    seeds = list(seeds)
    for task in MASK_TASKS:
        variant = "full" if task == "all" else f"band_mask:{task}"
        spec = AblationSpec(variant)
        task_data = spec.apply_to(data)
        name = "all" if task == "all" else f"w/o {task}"
        for seed in seeds:
            log.info("task %s, seed %d", name, seed)
            result = fit_variant(
                spec,
                task_data,
                mcfg,
                tcfg.replace(seed=seed),
                dataset=dataset,
                log=log,
            )
            report.keep(name, result, task_data.test)
            report.rows.append(
                _row(
                    dataset,
                    mcfg.horizon,
                    seed,
                    result.metrics,
                    result.runtime,
                    timings,
                    task=name,
                    band=None if task == "all" else task,
                )
            )
    return report


def run_layer_sweep(
    data: ExperimentData,
    mcfg: ModelConfig,
    tcfg: TrainConfig,
    seeds: Iterable[int],
    layers: Sequence[int] = (1, 2, 3),
    dataset: str = "",
    timings: bool = False,
    log: logging.Logger | None = None,
) -> ExperimentReport:
    """Full model trained with each FDBlock count."""
    log = log or logger
    report = ExperimentReport(kind="layer-sweep", group_by="layers")
    seeds = list(seeds)
    spec = AblationSpec()
    for count in layers:
        cfg = mcfg.replace(layers=count)
        for seed in seeds:
            log.info("layers %d, seed %d", count, seed)
            result = fit_variant(
                spec, data, cfg, tcfg.replace(seed=seed), dataset, log=log
            )
            report.keep(f"layers={count}", result, data.test)
            report.rows.append(
                _row(
                    dataset,
                    mcfg.horizon,
                    seed,
                    result.metrics,
                    result.runtime,
                    timings,
                    layers=count,
                )
            )
    return report


def per_frequency_losses(
    params: ParameterSet, windows: WindowBatch, mcfg: ModelConfig
) -> np.ndarray:
    """Loss of the forecast built from each final-layer frequency alone."""
    if len(windows) == 0:
        raise ShapeError("no windows")
    return model.per_frequency_losses(params, windows.x, windows.y, mcfg)


def pearson(a, b) -> float | None:
    """Pearson correlation, or None when either series is constant."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ShapeError(
            f"need two equal 1-d series, got {a.shape} and {b.shape}"
        )
    da = a - a.mean()
    db = b - b.mean()
    denom = np.sqrt(np.sum(da * da) * np.sum(db * db))
    if denom == 0.0:
        return None
    return float(np.clip(np.sum(da * db) / denom, -1.0, 1.0))


def covariance(a, b) -> float:
    """Population covariance of two equal-length series."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(np.mean((a - a.mean()) * (b - b.mean())))


@dataclass(frozen=True)
class WeightLossReport:
    """Learned fusion weights against per-frequency losses.

    ``pearson`` and ``covariance`` are taken per frequency over the
    epoch trajectory; ``cross_pearson`` and ``cross_covariance`` across
    frequencies at the final epoch.
    """

    weights: list[float]
    losses: list[float]
    pearson: list[float | None]
    covariance: list[float]
    cross_pearson: float | None
    cross_covariance: float
    epochs: int
    band_weights: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def band_weight_means(
    weights, lookback: int, length: int
) -> dict[str, float]:
    """Mean |W| over the bins of each named third of the input spectrum.

    The input-window bands are mapped onto the ``length``-row spectrum the
    weights live in.
    """
    weights = np.abs(np.asarray(weights, dtype=np.float64))
    out = {}
    for name in spectral.BAND_NAMES:
        band = fd.rescale_band(
            fd.input_band(name, lookback), lookback, length
        )
        out[name] = float(np.mean(weights[band.lo : band.hi]))
    return out


def weight_loss_correlation(
    weights, losses, lookback: int | None = None
) -> WeightLossReport:
    """Correlate fusion-weight and per-frequency-loss trajectories.

    ``weights`` and ``losses`` are (epochs, K) arrays, for example
    :attr:`TrainReport.fusion_trajectory` and
    :attr:`TrainReport.loss_trajectory`.
    """
    if losses is None:
        raise ContractError("no per-frequency losses were tracked")
    weights = np.asarray(weights, dtype=np.float64)
    losses = np.asarray(losses, dtype=np.float64)
    if weights.shape != losses.shape or weights.ndim != 2:
        raise ShapeError(
            f"trajectories differ: {weights.shape} vs {losses.shape}"
        )
    if weights.shape[0] < 3:
        raise ContractError(
            f"need at least 3 snapshots, got {weights.shape[0]}"
        )
    bins = weights.shape[1]
    per_bin = [pearson(weights[:, k], losses[:, k]) for k in range(bins)]
    cov = [covariance(weights[:, k], losses[:, k]) for k in range(bins)]
    bands = {}
    if lookback is not None:
        bands = band_weight_means(weights[-1], lookback, 2 * (bins - 1))
    return WeightLossReport(
        weights=weights[-1].tolist(),
        losses=losses[-1].tolist(),
        pearson=per_bin,
        covariance=cov,
        cross_pearson=pearson(weights[-1], losses[-1]),
        cross_covariance=covariance(weights[-1], losses[-1]),
        epochs=int(weights.shape[0]),
        band_weights=bands,
    )


def diagnose(
    report: TrainReport, lookback: int | None = None
) -> WeightLossReport:
    """:func:`weight_loss_correlation` over one training run."""
    return weight_loss_correlation(
        report.fusion_trajectory, report.loss_trajectory, lookback
    )


# Parameter classes compared by gradient_check.
GRADIENT_CLASSES = {
    "embed": ("embed_w", "embed_b", "embed_out_w", "embed_out_b"),
    "bank": ("bank_re", "bank_im"),
    "fusion": ("fusion",),
    "project": ("proj_w", "proj_b", "proj_out_w", "proj_out_b"),
}

GRADCHECK_TOLERANCE = 1e-5


@dataclass(frozen=True)
class GradientCheck:
    """Largest relative error per parameter class."""

    errors: dict[str, float]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(err < self.tolerance for err in self.errors.values())

    def to_dict(self) -> dict:
        return {
            "classes": [
                {
                    "class": name,
                    "max_rel_error": err,
                    "passed": err < self.tolerance,
                }
                for name, err in self.errors.items()
            ],
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def gradient_check(
    mcfg: ModelConfig,
    seed: int = 0,
    windows: int = 2,
    tolerance: float = GRADCHECK_TOLERANCE,
    step: float = 1e-6,
) -> GradientCheck:
    """Compare tape gradients with central differences on random data.

    Fusion weights are drawn at random rather than left at one, so every
    bin contributes differently.
    """
    mcfg = mcfg.replace(precision="float64", dropout=0.0)
    rng = nx.counter_rng(seed, 4)
    x = rng.standard_normal((windows, mcfg.lookback, mcfg.channels))
    y = rng.standard_normal((windows, mcfg.horizon, mcfg.channels))
    params = model.init_parameters(mcfg, seed)
    params = params.replace(
        fusion=rng.uniform(0.5, 1.5, size=params["fusion"].shape)
    )

    _, analytic = model.loss_and_gradients(params, x, y, mcfg)

    def loss(theta):
        pred = model.forward(x, theta, mcfg)
        return float(np.mean((pred - y) ** 2))

    numeric = nx.finite_difference_grad(loss, params, h=step)
    errors = {}
    for cls, names in GRADIENT_CLASSES.items():
        present = [name for name in names if name in params]
        errors[cls] = max(
            nx.relative_error(analytic[name], numeric[name])
            for name in present
        )
    return GradientCheck(errors, tolerance)
