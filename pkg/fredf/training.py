"""Objective, Adam and the mini-batch training loop."""

from __future__ import annotations

import logging
import time
from collections.abc import Mapping
from dataclasses import asdict, dataclass, field
from typing import Protocol

import numpy as np

from . import model
from . import numerics as nx
from .config import ModelConfig, TrainConfig
from .errors import (
    ContractError,
    NumericError,
    ShapeError,
    TrainingDivergedError,
)
from .model import ParameterSet

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8

# Windows per forward call when scoring a whole split.
EVAL_CHUNK = 64

logger = logging.getLogger(__name__)


class Windows(Protocol):
    """Anything carrying stacked inputs ``x`` (B, T, C) and targets ``y``."""

    x: np.ndarray
    y: np.ndarray


def _check_pair(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ShapeError(f"prediction {pred.shape} vs truth {truth.shape}")
    if pred.size == 0:
        raise ShapeError("cannot score empty arrays")
    return pred, truth


def mse_loss(pred, truth) -> float:
    """Mean of squared differences over every entry."""
    pred, truth = _check_pair(pred, truth)
    return float(np.mean((pred - truth) ** 2))


def mae(pred, truth) -> float:
    """Mean of absolute differences over every entry."""
    pred, truth = _check_pair(pred, truth)
    return float(np.mean(np.abs(pred - truth)))


@dataclass
class OptimizerState:
    """Adam moments per parameter name and the step counter."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def zeros(
        cls, params: Mapping[str, np.ndarray], frozen=()
    ) -> OptimizerState:
        names = [name for name in params if name not in frozen]
        return cls(
            m={name: np.zeros_like(params[name]) for name in names},
            v={name: np.zeros_like(params[name]) for name in names},
        )


def adam_step(
    params: ParameterSet,
    grads: Mapping[str, np.ndarray],
    state: OptimizerState,
    lr: float,
    frozen=(),
) -> tuple[ParameterSet, OptimizerState]:
    """One bias-corrected Adam update.

    Parameters without a gradient or named in ``frozen`` are left as they
    are. Returns new parameters and a new state; the inputs are untouched.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(
                f"non-finite gradient for {name!r} at step {state.step + 1}; "
                "try a smaller --lr or set TrainOptions.clip_norm"
            )
    step = state.step + 1
    m, v = dict(state.m), dict(state.v)
    changes = {}
    for name, g in grads.items():
        if name in frozen:
            continue
        if name not in m:
            m[name] = np.zeros_like(params[name])
            v[name] = np.zeros_like(params[name])
        m[name] = BETA1 * m[name] + (1.0 - BETA1) * g
        v[name] = BETA2 * v[name] + (1.0 - BETA2) * g * g
        m_hat = m[name] / (1.0 - BETA1**step)
        v_hat = v[name] / (1.0 - BETA2**step)
        update = lr * m_hat / (np.sqrt(v_hat) + EPSILON)
        changes[name] = (params[name] - update).astype(params[name].dtype)
    return params.replace(**changes), OptimizerState(m, v, step)


def clip_gradients(
    grads: Mapping[str, np.ndarray], max_norm: float
) -> tuple[dict[str, np.ndarray], float]:
    """Scale ``grads`` so their global L2 norm is at most ``max_norm``."""
    if not max_norm > 0:
        raise ContractError(f"max_norm must be positive, got {max_norm}")
    norm = float(
        np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    )
    if norm <= max_norm:
        return dict(grads), norm
    factor = max_norm / norm
    return {name: g * factor for name, g in grads.items()}, norm


class EarlyStopping:
    """Patience counter over the best validation loss seen so far.

    Only a strictly lower loss counts as an improvement.
    """

    def __init__(self, patience: int):
        if patience < 1:
            raise ContractError("patience must be >= 1")
        self.patience = patience
        self.best = float("inf")
        self.best_epoch: int | None = None
        self.counter = 0

    def update(self, loss: float, epoch: int) -> bool:
        """Record one validation loss; True if it is a new best."""
        if loss < self.best:
            self.best = loss
            self.best_epoch = epoch
            self.counter = 0
            return True
        self.counter += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.counter >= self.patience


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    fusion: list[float]
    frequency_losses: list[float] | None = None


@dataclass
class TrainReport:
    """What happened during one training run."""

    seed: int
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int | None = None
    best_val_loss: float | None = None
    stopped_early: bool = False
    steps: int = 0
    wall_clock: float | None = None

    @property
    def fusion_trajectory(self) -> np.ndarray:
        """Final-layer fusion weights per epoch, shape (epochs, K)."""
        return np.array([record.fusion for record in self.epochs])

    @property
    def loss_trajectory(self) -> np.ndarray | None:
        """Per-frequency validation losses per epoch, or None."""
        if not self.epochs or self.epochs[0].frequency_losses is None:
            return None
        return np.array([record.frequency_losses for record in self.epochs])

    def to_dict(self, include_timing: bool = False) -> dict:
        out = asdict(self)
        if not include_timing:
            out["wall_clock"] = None
        return out


def validation_loss(
    params: Mapping, windows: Windows, mcfg: ModelConfig
) -> float:
    """Mean squared error of the model over every window of a split."""
    total = 0.0
    count = 0
    for start in range(0, len(windows.x), EVAL_CHUNK):
        x = windows.x[start : start + EVAL_CHUNK]
        y = windows.y[start : start + EVAL_CHUNK]
        pred = model.forward(x, params, mcfg)
        total += float(np.sum((pred - y) ** 2, dtype=np.float64))
        count += y.size
    return total / count


def train(
    train_windows: Windows,
    val_windows: Windows,
    cfg: TrainConfig,
    mcfg: ModelConfig,
    frozen=(),
    init: ParameterSet | None = None,
    log: logging.Logger | None = None,
) -> tuple[ParameterSet, TrainReport]:
    """Fit a model with Adam and early stopping on validation loss.

    Mini-batches follow a per-epoch permutation drawn from a generator
    keyed by ``cfg.seed``; dropout masks come from a separate stream per
    step. Returns the parameters of the best validation epoch.
    """
    log = log or logger
    n = len(train_windows.x)
    if n == 0:
        raise ContractError("no training windows")
    if len(val_windows.x) == 0:
        raise ContractError("no validation windows")
    frozen = frozenset(frozen)

    params = init if init is not None else model.init_parameters(
        mcfg, cfg.seed
    )
    state = OptimizerState.zeros(params, frozen)
    stopper = EarlyStopping(cfg.patience)
    report = TrainReport(seed=cfg.seed)
    best = params
    started = time.perf_counter()

    tracked = val_windows.x[: cfg.diagnostic_windows]
    tracked_y = val_windows.y[: cfg.diagnostic_windows]

    for epoch in range(cfg.max_epochs):
        order = nx.counter_rng(cfg.seed, 1, epoch).permutation(n)
        epoch_loss = 0.0
        for step, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            rng = nx.counter_rng(cfg.seed, 2, epoch, step)
            loss, grads = model.loss_and_gradients(
                params,
                train_windows.x[idx],
                train_windows.y[idx],
                mcfg,
                training=True,
                rng=rng,
                frozen=frozen,
            )
            if not np.isfinite(loss):
                report.wall_clock = time.perf_counter() - started
                raise TrainingDivergedError(
                    f"training loss became {loss} at epoch {epoch}, step "
                    f"{step}",
                    report=report,
                )
            if cfg.clip_norm is not None:
                grads, _ = clip_gradients(grads, cfg.clip_norm)
            params, state = adam_step(params, grads, state, cfg.lr, frozen)
            epoch_loss += loss * len(idx)
            report.steps += 1

        val_loss = validation_loss(params, val_windows, mcfg)
        if not np.isfinite(val_loss):
            report.wall_clock = time.perf_counter() - started
            raise TrainingDivergedError(
                f"validation loss became {val_loss} at epoch {epoch}",
                report=report,
            )
        freq_losses = None
        if cfg.track_frequency_losses:
            freq_losses = model.per_frequency_losses(
                params, tracked, tracked_y, mcfg
            ).tolist()
        report.epochs.append(
            EpochRecord(
                epoch=epoch,
                train_loss=epoch_loss / n,
                val_loss=val_loss,
                fusion=params["fusion"][-1].tolist(),
                frequency_losses=freq_losses,
            )
        )
        log.info(
            "epoch %d: train %.6f, val %.6f", epoch, epoch_loss / n, val_loss
        )
        if stopper.update(val_loss, epoch):
            best = params
        elif stopper.should_stop:
            log.info(
                "early stopping after epoch %d (best epoch %d)",
                epoch,
                stopper.best_epoch,
            )
            report.stopped_early = True
            break

    report.best_epoch = stopper.best_epoch
    report.best_val_loss = stopper.best
    report.wall_clock = time.perf_counter() - started
    return best, report
