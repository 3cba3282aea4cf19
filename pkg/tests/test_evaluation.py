"""Tests for metrics, ablations and diagnostics (evaluation.py)."""

import numpy as np
import pytest


@pytest.fixture
def experiment():
    """Small z-scored experiment over a noisy two-channel series."""
    from fredf.data import SeriesTable, SplitSpec, prepare_experiment

    rng = np.random.default_rng(0)
    t = np.arange(120)[:, None]
    values = np.sin(2 * np.pi * t / 10) + 0.1 * rng.standard_normal((120, 2))
    table = SeriesTable(values, ("a", "b"))
    return prepare_experiment(table, SplitSpec(70, 25, 25), 6, 4)


@pytest.fixture
def quick_train():
    from fredf.config import TrainConfig

    return TrainConfig(lr=1e-2, batch_size=16, max_epochs=3, patience=3)


class TestEvaluate:
    """Test suite for evaluate() and mean_metrics()."""

    def test_matches_direct_metrics(self, experiment, tiny_config):
        """Chunked metrics equal MSE and MAE over every window at once."""
        from fredf.evaluation import evaluate
        from fredf.model import forward, init_parameters
        from fredf.training import mae, mse_loss

        params = init_parameters(tiny_config, seed=0)
        pred = forward(experiment.test.x, params, tiny_config)
        metrics = evaluate(params, experiment.test, tiny_config)

        assert metrics.mse == pytest.approx(mse_loss(pred, experiment.test.y))
        assert metrics.mae == pytest.approx(mae(pred, experiment.test.y))
        assert metrics.raw_mse is None

    def test_raw_scale(self, experiment, tiny_config):
        """With stats the raw-scale metrics are computed too."""
        from fredf.evaluation import evaluate
        from fredf.model import forward, init_parameters

        params = init_parameters(tiny_config, seed=0)
        metrics = evaluate(
            params, experiment.test, tiny_config, stats=experiment.stats
        )
        pred = experiment.stats.invert(
            forward(experiment.test.x, params, tiny_config)
        )
        truth = experiment.stats.invert(experiment.test.y)

        assert metrics.raw_mse == pytest.approx(np.mean((pred - truth) ** 2))

    def test_permutation_invariant(self, experiment, tiny_config):
        """Reordering the windows does not change the metrics."""
        from fredf.data import WindowBatch
        from fredf.evaluation import evaluate
        from fredf.model import init_parameters

        params = init_parameters(tiny_config, seed=0)
        test = experiment.test
        order = np.random.default_rng(5).permutation(len(test))
        shuffled = WindowBatch(
            test.x[order], test.y[order], test.origins[order]
        )

        a = evaluate(params, test, tiny_config)
        b = evaluate(params, shuffled, tiny_config)

        assert b.mse == pytest.approx(a.mse, rel=1e-12)
        assert b.mae == pytest.approx(a.mae, rel=1e-12)

    def test_empty(self, experiment, tiny_config):
        """An empty window set cannot be evaluated."""
        from fredf.errors import ShapeError
        from fredf.evaluation import evaluate
        from fredf.model import init_parameters

        params = init_parameters(tiny_config, seed=0)

        with pytest.raises(ShapeError):
            evaluate(params, experiment.test.head(0), tiny_config)

    def test_mean_metrics(self):
        """Means over seeds; seeds are concatenated."""
        from fredf.evaluation import MetricPair, mean_metrics

        out = mean_metrics(
            [
                MetricPair(1.0, 2.0, 96, seeds=(1,)),
                MetricPair(3.0, 4.0, 96, seeds=(2,)),
            ]
        )

        assert (out.mse, out.mae, out.seeds) == (2.0, 3.0, (1, 2))
        assert out.raw_mse is None


class TestAblationSpec:
    """Test suite for AblationSpec."""

    def test_unknown_variant(self):
        """Unknown variants are rejected."""
        from fredf.errors import ContractError
        from fredf.evaluation import AblationSpec

        with pytest.raises(ContractError):
            AblationSpec("no_such_thing")
        with pytest.raises(ContractError):
            AblationSpec("band_mask:ultra")

    def test_frozen_sets(self):
        """static_fusion freezes fusion; no_transfer freezes the bank."""
        from fredf.evaluation import AblationSpec

        assert AblationSpec("static_fusion").frozen == {"fusion"}
        assert AblationSpec("no_transfer").frozen == {"bank_re", "bank_im"}
        assert AblationSpec("full").frozen == frozenset()

    def test_band(self):
        """band_mask variants name their band; none masks nothing."""
        from fredf.evaluation import AblationSpec

        assert AblationSpec("band_mask:high").band == "high"
        assert AblationSpec("band_mask:none").band is None
        assert AblationSpec("full").band is None

    def test_no_transfer_starts_at_identity(self, tiny_config):
        """no_transfer initializes H to the identity."""
        from fredf.evaluation import AblationSpec

        params = AblationSpec("no_transfer").initial_parameters(
            tiny_config, 0
        )

        np.testing.assert_array_equal(params["bank_re"][0, 0], np.eye(3))

    def test_fuse_on_spectrum_pairs_modes(self, tiny_config):
        """The variant runs fast, its baseline runs naive."""
        from fredf.evaluation import AblationSpec

        spec = AblationSpec("fuse_on_spectrum")

        assert spec.model_config(tiny_config).block_mode == "fast"
        assert spec.baseline_config(tiny_config).block_mode == "naive"

    def test_apply_to_masks_inputs(self, experiment):
        """apply_to masks inputs of every split and keeps targets."""
        from fredf.evaluation import AblationSpec

        masked = AblationSpec("band_mask:low").apply_to(experiment)

        np.testing.assert_allclose(
            masked.train.x.mean(axis=1), 0.0, atol=1e-12
        )
        np.testing.assert_array_equal(masked.test.y, experiment.test.y)
        assert AblationSpec("full").apply_to(experiment) is experiment


class TestExperiments:
    """Test suite for run_ablation / run_mask_experiment / layer sweep."""

    def test_static_fusion_ablation(
        self, experiment, tiny_config, quick_train
    ):
        """Paired rows per seed; fusion stays at one in the variant."""
        from fredf.evaluation import AblationSpec, run_ablation

        report = run_ablation(
            AblationSpec("static_fusion"),
            experiment,
            tiny_config,
            quick_train,
            seeds=[0, 1],
            dataset="toy",
        )

        assert [r["variant"] for r in report.rows] == [
            "full",
            "static_fusion",
            "full",
            "static_fusion",
        ]
        assert all(r["runtime"] is None for r in report.rows)
        summary = report.summary()
        assert [s["variant"] for s in summary] == ["full", "static_fusion"]
        assert summary[0]["seeds"] == [0, 1]

    def test_fuse_on_spectrum_matches_baseline(
        self, experiment, tiny_config, quick_train
    ):
        """Fast and naive blocks train to the same metrics."""
        from fredf.evaluation import AblationSpec, run_ablation

        report = run_ablation(
            AblationSpec("fuse_on_spectrum"),
            experiment,
            tiny_config,
            quick_train,
            seeds=[0],
        )
        full, fused = report.rows

        assert fused["mse"] == pytest.approx(full["mse"], rel=1e-6)

    def test_mask_experiment_tasks(
        self, experiment, tiny_config, quick_train
    ):
        """One group per task, in order."""
        from fredf.evaluation import run_mask_experiment

        report = run_mask_experiment(
            experiment,
            tiny_config,
            quick_train.replace(max_epochs=1),
            seeds=[0],
        )

        assert [s["task"] for s in report.summary()] == [
            "all",
            "w/o low",
            "w/o mid",
            "w/o high",
        ]
        assert report.to_dict()["kind"] == "mask-experiment"

    def test_kept_forecasts_per_task(
        self, experiment, tiny_config, quick_train
    ):
        """The first fit of every task forecasts the same test window."""
        from fredf.data import input_band, mask_band_batch
        from fredf.errors import ContractError
        from fredf.evaluation import run_mask_experiment
        from fredf.model import forward

        report = run_mask_experiment(
            experiment,
            tiny_config,
            quick_train.replace(max_epochs=1),
            seeds=[0, 1],
        )
        forecasts = report.forecasts(2)

        assert list(forecasts) == ["all", "w/o low", "w/o mid", "w/o high"]
        assert all(f.shape == (4, 2) for f in forecasts.values())
        kept = report.fits["w/o low"]
        masked = mask_band_batch(experiment.test, input_band("low", 6))
        np.testing.assert_allclose(
            forecasts["w/o low"],
            forward(masked.x[2], kept.params, kept.config),
        )
        assert set(report.to_dict()) == {"kind", "rows", "summary"}
        with pytest.raises(ContractError):
            report.forecasts(len(experiment.test))

    def test_layer_sweep(self, experiment, tiny_config, quick_train):
        """One group per FDBlock count."""
        from fredf.evaluation import run_layer_sweep

        report = run_layer_sweep(
            experiment,
            tiny_config,
            quick_train.replace(max_epochs=1),
            seeds=[0],
            layers=(1, 2),
            timings=True,
        )

        assert [s["layers"] for s in report.summary()] == [1, 2]
        assert all(r["runtime"] >= 0.0 for r in report.rows)


class TestCorrelation:
    """Test suite for pearson(), covariance() and the W/loss report."""

    def test_pearson(self):
        """Perfect positive and negative correlation."""
        from fredf.evaluation import pearson

        assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
        assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_pearson_constant_is_none(self):
        """A constant series has no correlation."""
        from fredf.evaluation import pearson

        assert pearson([1, 1, 1], [1, 2, 3]) is None

    def test_covariance(self):
        """Population covariance."""
        from fredf.evaluation import covariance

        assert covariance([1, 2, 3], [1, 2, 3]) == pytest.approx(2.0 / 3.0)

    def test_weight_loss_correlation(self):
        """Per-bin and cross-bin statistics over the trajectories."""
        from fredf.evaluation import weight_loss_correlation

        weights = np.array([[1.0, 1.0], [0.8, 1.2], [0.6, 1.4]])
        losses = np.array([[0.5, 0.5], [0.6, 0.4], [0.7, 0.3]])
        report = weight_loss_correlation(weights, losses)

        assert report.pearson == [pytest.approx(-1.0), pytest.approx(-1.0)]
        assert report.cross_pearson == pytest.approx(-1.0)
        assert report.epochs == 3
        assert report.band_weights == {}

    def test_needs_three_snapshots(self):
        """Fewer than three epochs cannot be correlated."""
        from fredf.errors import ContractError
        from fredf.evaluation import weight_loss_correlation

        with pytest.raises(ContractError):
            weight_loss_correlation(np.ones((2, 4)), np.ones((2, 4)))

    def test_untracked_losses(self):
        """A run without tracked losses cannot be diagnosed."""
        from fredf.errors import ContractError
        from fredf.evaluation import weight_loss_correlation

        with pytest.raises(ContractError):
            weight_loss_correlation(np.ones((3, 4)), None)

    def test_band_weight_means(self):
        """Band means of |W| over the mapped input bands."""
        from fredf.evaluation import band_weight_means

        weights = np.arange(49, dtype=float)
        out = band_weight_means(weights, lookback=48, length=96)

        assert set(out) == {"low", "mid", "high"}
        assert out["low"] < out["mid"] < out["high"]

    def test_diagnose_training_run(self, experiment, tiny_config, quick_train):
        """diagnose() reads the trajectories of a TrainReport."""
        from fredf.evaluation import diagnose
        from fredf.training import train

        _, report = train(
            experiment.train,
            experiment.val,
            quick_train.replace(patience=10),
            tiny_config,
        )
        out = diagnose(report, lookback=tiny_config.lookback)

        assert len(out.weights) == tiny_config.bins
        assert len(out.pearson) == tiny_config.bins
        assert set(out.band_weights) == {"low", "mid", "high"}


class TestGradientCheck:
    """Test suite for gradient_check()."""

    @pytest.mark.parametrize("hidden", [0, 3])
    def test_passes(self, hidden):
        """Analytic gradients agree with finite differences."""
        from fredf.config import ModelConfig
        from fredf.evaluation import gradient_check

        mcfg = ModelConfig(8, 8, 2, 3, layers=2, hidden=hidden)
        check = gradient_check(mcfg, seed=1)

        assert check.passed, check.errors
        assert set(check.errors) == {"embed", "bank", "fusion", "project"}
        assert check.to_dict()["passed"] is True
