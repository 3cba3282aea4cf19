"""Command-line entry point.

    fredf train --dataset=ETTh1 --horizon=96
    fredf eval --dataset=ETTh1 --checkpoint=runs/checkpoint-seed2024.zip
    fredf ablate --dataset=synthetic --variant=static_fusion --seeds 1 2 3

Every option is a traitlet of the classes in :mod:`fredf.config`, so the
same settings can come from a config file given with ``--config``; flags
on the command line win over the file.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pandas as pd
from traitlets import TraitError, Unicode
from traitlets.config import Application
from traitlets.config.loader import JSONFileConfigLoader, PyFileConfigLoader

from . import __version__, data, evaluation, model, reports
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import (
    DataOptions,
    ModelConfig,
    ModelOptions,
    RunOptions,
    TrainOptions,
    get_model_config,
    get_train_config,
    seed_list,
)
from .datasets import SYNTHETIC, resolve_dataset
from .errors import (
    CheckpointError,
    ConfigError,
    ContractError,
    GradientCheckError,
    IngestionError,
    NormalizationError,
    NumericError,
    PartitionError,
    ShapeError,
    SplitError,
    TrainingDivergedError,
)
from .evaluation import AblationSpec
from .plotting import emit_plot

# Exit status per error family; the first matching entry wins.
EXIT_CODES: list[tuple[type[BaseException], int]] = [
    (FileNotFoundError, 2),
    (IngestionError, 3),
    (SplitError, 3),
    (NormalizationError, 3),
    (PartitionError, 3),
    (GradientCheckError, 7),
    (CheckpointError, 6),
    (NumericError, 5),
    (ShapeError, 4),
    (ConfigError, 4),
    (ContractError, 4),
    (TraitError, 4),
]

aliases = {
    **Application.aliases,
    "config": "FreDFCommand.config_file",
    "dataset": "DataOptions.dataset",
    "split": "DataOptions.split",
    "horizon": "ModelOptions.horizon",
    "lookback": "ModelOptions.lookback",
    "dim": "ModelOptions.dim",
    "layers": "ModelOptions.layers",
    "dropout": "ModelOptions.dropout",
    "hidden": "ModelOptions.hidden",
    "block-mode": "ModelOptions.block_mode",
    "precision": "ModelOptions.precision",
    "lr": "TrainOptions.lr",
    "batch-size": "TrainOptions.batch_size",
    "epochs": "TrainOptions.max_epochs",
    "patience": "TrainOptions.patience",
    "seed": "TrainOptions.seed",
    "seeds": "TrainOptions.seeds",
    "repeats": "TrainOptions.repeats",
    "clip-norm": "TrainOptions.clip_norm",
    "variant": "RunOptions.variant",
    "out": "RunOptions.out",
    "checkpoint": "RunOptions.checkpoint",
    "window": "RunOptions.window",
    "channel": "RunOptions.channel",
}

flags = {
    **Application.flags,
    "raw-scale": (
        {"DataOptions": {"raw_scale": True}},
        "Also report metrics on the original data scale.",
    ),
    "timings": (
        {"RunOptions": {"timings": True}},
        "Write wall-clock runtimes into reports.",
    ),
    "plot": (
        {"RunOptions": {"plot": True}},
        "Also write forecast plots (train, predict, ablate, "
        "mask-experiment).",
    ),
}


def exit_code(exc: BaseException) -> int:
    for kind, code in EXIT_CODES:
        if isinstance(exc, kind):
            return code
    return 1


class FreDFCommand(Application):
    """Shared option handling for every subcommand."""

    version = __version__
    aliases = aliases
    flags = flags
    classes = [ModelOptions, TrainOptions, DataOptions, RunOptions]

    config_file = Unicode(
        "",
        help=(
            "traitlets config file (.py or .json). Flags given on the "
            "command line override its values."
        ),
    ).tag(config=True)

    def initialize(self, argv=None):
        super().initialize(argv)
        if self.config_file:
            self._read_config_file(Path(self.config_file))
        # parse_command_line turns a bare TraitError into exit(1).
        try:
            self.model_options = ModelOptions(parent=self)
            self.train_options = TrainOptions(parent=self)
            self.data_options = DataOptions(parent=self)
            self.run_options = RunOptions(parent=self)
        except TraitError as err:
            raise ConfigError(str(err)) from err

    def _read_config_file(self, path: Path) -> None:
        if not path.is_file():
            raise FileNotFoundError(f"config file {path} not found")
        if path.suffix == ".json":
            loader = JSONFileConfigLoader(path.name, str(path.parent))
        else:
            loader = PyFileConfigLoader(path.name, str(path.parent))
        self.update_config(loader.load_config())
        self.update_config(self.cli_config)
        self.log.debug("loaded config from %s", path)

    # -- shared helpers ----------------------------------------------------

    @property
    def out_dir(self) -> Path:
        out = Path(self.run_options.out)
        out.mkdir(parents=True, exist_ok=True)
        return out

    @property
    def timings(self) -> bool:
        return bool(self.run_options.timings)

    def load_table(
        self, lookback: int | None = None
    ) -> tuple[data.SeriesTable, str]:
        """Read or generate the series named by ``--dataset``."""
        found = resolve_dataset(self.data_options.dataset)
        if found == SYNTHETIC:
            spec = data.SyntheticSpec(
                rows=self.data_options.synthetic_rows,
                channels=self.data_options.synthetic_channels,
                window=lookback or self.model_options.lookback,
                snr=self.data_options.synthetic_snr,
            )
            self.log.info("generating synthetic series %s", spec)
            table = data.synthetic_band_dataset(
                self.data_options.synthetic_seed, spec
            )
            return table, SYNTHETIC
        self.log.info("loading %s", found)
        return data.load_csv(found), Path(found).stem

    def split_spec(self, table: data.SeriesTable, name: str):
        if self.data_options.split:
            return data.SplitSpec(*self.data_options.split)
        return data.split_for(name, table.rows)

    def experiment(self, band: str | None = None):
        table, name = self.load_table()
        split = self.split_spec(table, name)
        self.log.info(
            "split %s: %d/%d/%d rows",
            name,
            split.train,
            split.val,
            split.test,
        )
        prepared = data.prepare_experiment(
            table,
            split,
            self.model_options.lookback,
            self.model_options.horizon,
            band=band,
        )
        return prepared, name

    def model_config(self, channels: int):
        return get_model_config(self.model_options, channels)

    def seeds(self) -> list[int]:
        return seed_list(self.train_options)

    def checkpoint(self) -> Checkpoint:
        if not self.run_options.checkpoint:
            raise FileNotFoundError(
                "no checkpoint given.\n"
                "Solutions:\n"
                "  - Run 'fredf train' first\n"
                "  - Pass --checkpoint=path/to/checkpoint.zip"
            )
        return load_checkpoint(self.run_options.checkpoint)

    def test_windows(self, ckpt: Checkpoint):
        """Z-scored test windows matching a checkpoint's model."""
        cfg = ckpt.config
        table, name = self.load_table(cfg.lookback)
        if table.width != cfg.channels:
            raise ShapeError(
                f"checkpoint expects {cfg.channels} channels, dataset "
                f"{name} has {table.width}"
            )
        train, _, test = data.chronological_split(
            table, self.split_spec(table, name)
        )
        stats = ckpt.stats or data.fit_zscore(train)
        windows = data.window_batch(
            data.apply_zscore(test, stats), cfg.lookback, cfg.horizon
        )
        band = AblationSpec(self.run_options.variant).band
        if band is not None:
            windows = data.mask_band_batch(
                windows, data.input_band(band, cfg.lookback)
            )
        return windows, stats, name

    def pick_window(self, windows: data.WindowBatch) -> int:
        index = self.run_options.window
        if not 0 <= index < len(windows):
            raise ContractError(
                f"window {index} outside [0, {len(windows)}) test windows"
            )
        return index

    def pick_channel(self, channels) -> int:
        channel = self.run_options.channel
        if not 0 <= channel < len(channels):
            raise ContractError(
                f"channel {channel} outside [0, {len(channels)})"
            )
        return channel

    def plot_comparison(
        self, report: evaluation.ExperimentReport, prepared, stem: str
    ) -> None:
        """Overlay the forecast of every group on one test window."""
        index = self.run_options.window
        channel = self.pick_channel(prepared.channels)
        forecasts = report.forecasts(index)
        stats = prepared.stats
        label = prepared.channels[channel]
        svg, csv = emit_plot(
            {
                name: stats.invert(pred)[:, channel]
                for name, pred in forecasts.items()
            },
            stats.invert(prepared.test.y[index])[:, channel],
            self.out_dir / f"{stem}-window{index}-{label}.svg",
            title=f"{stem}: {label}, test window {index}",
        )
        self.log.info("wrote %s and %s", svg, csv)


class TrainCommand(FreDFCommand):
    description = (
        "Train one model per seed; write checkpoints, per-seed reports and "
        "a mean summary."
    )

    def start(self):
        spec = AblationSpec(self.run_options.variant)
        prepared, name = self.experiment(band=spec.band)
        mcfg = self.model_config(len(prepared.channels))
        runs = []
        for seed in self.seeds():
            tcfg = get_train_config(self.train_options, seed)
            self.log.info("training %s, seed %d", name, seed)
            try:
                result = evaluation.fit_variant(
                    spec, prepared, mcfg, tcfg, name, log=self.log
                )
            except TrainingDivergedError as exc:
                if exc.report is not None:
                    reports.write_json(
                        self.out_dir / f"diverged-seed{seed}.json",
                        exc.report.to_dict(self.timings),
                    )
                raise
            metrics = result.metrics
            if self.data_options.raw_scale:
                metrics = evaluation.evaluate(
                    result.params,
                    prepared.test,
                    spec.model_config(mcfg),
                    stats=prepared.stats,
                    dataset=name,
                    seeds=(seed,),
                )
            runs.append(metrics)
            history = {
                "fusion": result.report.fusion_trajectory.tolist(),
                "frequency_losses": _listed(result.report.loss_trajectory),
            }
            ckpt = save_checkpoint(
                self.out_dir / f"checkpoint-seed{seed}.zip",
                result.params,
                spec.model_config(mcfg),
                prepared.channels,
                prepared.stats,
                history,
            )
            reports.write_json(
                self.out_dir / f"train-seed{seed}.json",
                {
                    "dataset": name,
                    "horizon": mcfg.horizon,
                    "variant": spec.variant,
                    "seed": seed,
                    "checkpoint": ckpt.name,
                    "metrics": metrics.to_dict(),
                    "model": spec.model_config(mcfg).to_dict(),
                    "training": tcfg.to_dict(),
                    "report": result.report.to_dict(self.timings),
                    "runtime": result.runtime if self.timings else None,
                },
            )
            self.log.info(
                "seed %d: test mse %.6f, mae %.6f",
                seed,
                metrics.mse,
                metrics.mae,
            )
            if self.run_options.plot:
                self._plot(result.params, prepared, mcfg, spec, seed)
        summary = evaluation.mean_metrics(runs)
        reports.write_json(
            self.out_dir / "train-summary.json",
            {"variant": spec.variant, "metrics": summary.to_dict()},
        )
        self.log.info(
            "mean over %d seed(s): mse %.6f, mae %.6f",
            len(runs),
            summary.mse,
            summary.mae,
        )

    def _plot(self, params, prepared, mcfg, spec, seed):
        index = self.pick_window(prepared.test)
        channel = self.pick_channel(prepared.channels)
        x = prepared.test.x[index]
        pred = model.forward(x, params, spec.model_config(mcfg))
        emit_plot(
            pred[:, channel],
            prepared.test.y[index][:, channel],
            self.out_dir / f"forecast-seed{seed}-window{index}.svg",
            title=f"{prepared.channels[channel]}, seed {seed}",
        )


class EvalCommand(FreDFCommand):
    description = "Score a checkpoint on the test split."

    def start(self):
        ckpt = self.checkpoint()
        windows, stats, name = self.test_windows(ckpt)
        metrics = evaluation.evaluate(
            ckpt.params,
            windows,
            ckpt.config,
            stats=stats if self.data_options.raw_scale else None,
            dataset=name,
        )
        reports.write_json(
            self.out_dir / "eval.json",
            {
                "dataset": name,
                "checkpoint": Path(self.run_options.checkpoint).name,
                "windows": len(windows),
                "metrics": metrics.to_dict(),
            },
        )
        self.log.info(
            "%s: mse %.6f, mae %.6f over %d windows",
            name,
            metrics.mse,
            metrics.mae,
            len(windows),
        )


class PredictCommand(FreDFCommand):
    description = (
        "Forecast one test window with a checkpoint and write it as CSV "
        "(and SVG with --plot)."
    )

    def forecast(self):
        ckpt = self.checkpoint()
        windows, stats, name = self.test_windows(ckpt)
        index = self.pick_window(windows)
        pred = model.forward(
            windows.x[index], ckpt.params, ckpt.config
        )
        return (
            ckpt,
            stats.invert(pred),
            stats.invert(windows.y[index]),
            index,
            name,
        )

    def start(self):
        ckpt, pred, truth, index, name = self.forecast()
        frame = pd.DataFrame({"step": np.arange(len(pred))})
        for j, channel in enumerate(ckpt.channels):
            frame[f"{channel}_prediction"] = pred[:, j]
            frame[f"{channel}_truth"] = truth[:, j]
        path = self.out_dir / f"predict-window{index}.csv"
        frame.to_csv(path, index=False, float_format="%.10g")
        self.log.info("wrote %s", path)
        if self.run_options.plot:
            self.plot(ckpt, pred, truth, index, name)

    def plot(self, ckpt, pred, truth, index, name):
        channel = self.pick_channel(ckpt.channels)
        label = ckpt.channels[channel]
        svg, csv = emit_plot(
            pred[:, channel],
            truth[:, channel],
            self.out_dir / f"plot-window{index}-{label}.svg",
            title=f"{name} {label}, test window {index}",
        )
        self.log.info("wrote %s and %s", svg, csv)


class PlotCommand(PredictCommand):
    description = "Plot forecast against truth for one test window."

    def start(self):
        self.plot(*self.forecast())


class MaskExperimentCommand(FreDFCommand):
    description = (
        "Train with all input frequencies, then without the low, mid and "
        "high band."
    )

    def start(self):
        prepared, name = self.experiment()
        mcfg = self.model_config(len(prepared.channels))
        tcfg = get_train_config(self.train_options)
        report = evaluation.run_mask_experiment(
            prepared,
            mcfg,
            tcfg,
            self.seeds(),
            dataset=name,
            timings=self.timings,
            log=self.log,
        )
        reports.write_json(
            self.out_dir / "mask-experiment.json", report.to_dict()
        )
        if self.run_options.plot:
            self.plot_comparison(report, prepared, "mask-experiment")
        for row in report.summary():
            self.log.info(
                "%-8s mse %.6f, mae %.6f", row["task"], row["mse"], row["mae"]
            )


class AblateCommand(FreDFCommand):
    description = (
        "Train a variant and the full model on paired seeds. "
        "--variant=layers sweeps the FDBlock count."
    )

    def start(self):
        variant = self.run_options.variant
        prepared, name = self.experiment()
        mcfg = self.model_config(len(prepared.channels))
        tcfg = get_train_config(self.train_options)
        if variant == "layers":
            report = evaluation.run_layer_sweep(
                prepared,
                mcfg,
                tcfg,
                self.seeds(),
                dataset=name,
                timings=self.timings,
                log=self.log,
            )
            stem = "layer-sweep"
        else:
            report = evaluation.run_ablation(
                AblationSpec(variant),
                prepared,
                mcfg,
                tcfg,
                self.seeds(),
                dataset=name,
                timings=self.timings,
                log=self.log,
            )
            stem = f"ablation-{variant.replace(':', '-')}"
        reports.write_json(self.out_dir / f"{stem}.json", report.to_dict())
        if self.run_options.plot:
            self.plot_comparison(report, prepared, stem)
        for row in report.summary():
            self.log.info(
                "%-16s mse %.6f, mae %.6f",
                row[report.group_by],
                row["mse"],
                row["mae"],
            )


class GradcheckCommand(FreDFCommand):
    description = (
        "Compare analytic gradients with finite differences on a tiny "
        "model (T=8, S=8, C=2, D=3, L=2)."
    )

    def start(self):
        mcfg = ModelConfig(
            lookback=8,
            horizon=8,
            channels=2,
            dim=3,
            layers=2,
            hidden=self.model_options.hidden,
            block_mode=self.model_options.block_mode,
        )
        check = evaluation.gradient_check(mcfg, seed=self.train_options.seed)
        reports.write_json(self.out_dir / "gradcheck.json", check.to_dict())
        for name, err in check.errors.items():
            status = "ok" if err < check.tolerance else "FAIL"
            self.log.info("%-8s max rel err %.3e  %s", name, err, status)
        if not check.passed:
            failed = [
                name
                for name, err in check.errors.items()
                if err >= check.tolerance
            ]
            raise GradientCheckError(
                f"gradient check failed for {failed} "
                f"(tolerance {check.tolerance})"
            )


class DiagnoseCommand(FreDFCommand):
    description = (
        "Correlate fusion weights with per-frequency losses over a "
        "training run (from --checkpoint, or a fresh run)."
    )

    def start(self):
        lookback = self.model_options.lookback
        if self.run_options.checkpoint:
            ckpt = self.checkpoint()
            history = ckpt.history or {}
            lookback = ckpt.config.lookback
            report = evaluation.weight_loss_correlation(
                history.get("fusion", []),
                history.get("frequency_losses"),
                lookback,
            )
            windows, _, _ = self.test_windows(ckpt)
            test_losses = evaluation.per_frequency_losses(
                ckpt.params, windows, ckpt.config
            )
        else:
            prepared, name = self.experiment()
            mcfg = self.model_config(len(prepared.channels))
            tcfg = get_train_config(self.train_options).replace(
                track_frequency_losses=True
            )
            result = evaluation.fit_variant(
                AblationSpec(), prepared, mcfg, tcfg, name, log=self.log
            )
            report = evaluation.diagnose(result.report, lookback)
            test_losses = evaluation.per_frequency_losses(
                result.params, prepared.test, mcfg
            )
        payload = report.to_dict()
        payload["test_frequency_losses"] = test_losses.tolist()
        reports.write_json(self.out_dir / "diagnose.json", payload)
        self.log.info(
            "cross-frequency pearson r(W, loss) = %s", report.cross_pearson
        )
        for band, value in report.band_weights.items():
            self.log.info("mean |W| over %s band: %.4f", band, value)


def _listed(values):
    return None if values is None else values.tolist()


def _factory(cls):
    return lambda parent: cls(parent=parent)


class FreDFApp(Application):
    """Frequency-domain forecaster: train, evaluate and ablate."""

    name = "fredf"
    description = __doc__
    version = __version__

    subcommands = {
        "train": (_factory(TrainCommand), TrainCommand.description),
        "eval": (_factory(EvalCommand), EvalCommand.description),
        "predict": (_factory(PredictCommand), PredictCommand.description),
        "mask-experiment": (
            _factory(MaskExperimentCommand),
            MaskExperimentCommand.description,
        ),
        "ablate": (_factory(AblateCommand), AblateCommand.description),
        "gradcheck": (
            _factory(GradcheckCommand),
            GradcheckCommand.description,
        ),
        "diagnose": (_factory(DiagnoseCommand), DiagnoseCommand.description),
        "plot": (_factory(PlotCommand), PlotCommand.description),
    }

    def start(self):
        if self.subapp is None:
            self.print_subcommands()
            self.exit(1)
        self.subapp.start()


def main(argv: list[str] | None = None) -> int:
    """Run one command; return its exit status."""
    app = FreDFApp()
    try:
        app.initialize(argv)
        app.start()
    except SystemExit as exc:
        if exc.code is None:
            return 0
        return exc.code if isinstance(exc.code, int) else 1
    except Exception as exc:  # noqa: BLE001
        log = app.subapp.log if app.subapp is not None else app.log
        log.error("%s", exc)
        log.debug("traceback", exc_info=True)
        return exit_code(exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
