"""Directional checks of the training protocol on the noise-band series.

The synthetic series carries its signal in the low band and white noise
in the high band of the input spectrum. These runs take minutes and are
deselected by default. Run with:
    pytest -m experiment
"""

import numpy as np
import pytest

SEEDS = (0, 1, 2)
LOOKBACK = 48
HORIZON = 48


@pytest.fixture(scope="module")
def noise_band():
    from fredf.data import (
        SyntheticSpec,
        prepare_experiment,
        split_for,
        synthetic_band_dataset,
    )

    spec = SyntheticSpec(rows=1600, channels=2, window=LOOKBACK, snr=1.0)
    table = synthetic_band_dataset(0, spec)
    return prepare_experiment(
        table, split_for("synthetic", table.rows), LOOKBACK, HORIZON
    )


@pytest.fixture(scope="module")
def configs():
    from fredf.config import ModelConfig, TrainConfig

    mcfg = ModelConfig(LOOKBACK, HORIZON, channels=2, dim=8)
    tcfg = TrainConfig(
        lr=1e-3,
        batch_size=32,
        max_epochs=8,
        patience=3,
        track_frequency_losses=False,
    )
    return mcfg, tcfg


def _means(report):
    return {
        row[report.group_by]: row["mse"] for row in report.summary()
    }


@pytest.mark.experiment
def test_masking_noise_band_helps(noise_band, configs):
    """Dropping the noisy band helps; dropping the signal band hurts."""
    from fredf.evaluation import run_mask_experiment

    mcfg, tcfg = configs
    report = run_mask_experiment(noise_band, mcfg, tcfg, SEEDS)
    mse = _means(report)

    assert mse["w/o high"] < mse["all"] < mse["w/o low"]


@pytest.mark.experiment
def test_dynamic_fusion_not_worse_than_static(noise_band, configs):
    """Learned fusion weights do at least as well as all-ones weights."""
    from fredf.evaluation import AblationSpec, run_ablation

    mcfg, tcfg = configs
    report = run_ablation(
        AblationSpec("static_fusion"), noise_band, mcfg, tcfg, SEEDS
    )
    mse = _means(report)

    assert mse["full"] <= mse["static_fusion"]


@pytest.mark.experiment
def test_transfer_function_not_worse_than_identity(noise_band, configs):
    """Learned transfer matrices do at least as well as the identity."""
    from fredf.evaluation import AblationSpec, run_ablation

    mcfg, tcfg = configs
    report = run_ablation(
        AblationSpec("no_transfer"), noise_band, mcfg, tcfg, SEEDS
    )
    mse = _means(report)

    assert mse["no_transfer"] >= mse["full"]


@pytest.mark.experiment
def test_noise_band_weights_shrink(noise_band, configs):
    """Mean |W| over the noise band ends below the signal band's."""
    from fredf.evaluation import band_weight_means
    from fredf.training import train

    mcfg, tcfg = configs
    low, high = [], []
    for seed in SEEDS:
        params, _ = train(
            noise_band.train, noise_band.val, tcfg.replace(seed=seed), mcfg
        )
        bands = band_weight_means(params.fusion[-1], LOOKBACK, mcfg.length)
        low.append(bands["low"])
        high.append(bands["high"])

    assert np.mean(high) < np.mean(low)
