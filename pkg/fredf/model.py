"""The frequency-domain forecaster.

A window of T rows is zero-padded to T + S rows, embedded per time step,
passed through L FDBlocks and projected back to the C channels; the last
S rows are the forecast.

An FDBlock takes the real spectrum of its input, multiplies the D-vector
of every bin m by a learnable complex matrix H[l, m], maps every bin back
to the time domain on its own and sums the per-bin series with learnable
real weights W[l, m]. The inverse transform is linear, so fusing the
weights in the spectrum before a single inverse gives the same operator;
``block_mode="fast"`` does that, ``"naive"`` runs the per-bin loop.

Layer indices are 0-based.
"""

from __future__ import annotations

from collections.abc import Iterator, Mapping

import numpy as np

from . import numerics as nx
from . import spectral
from .config import ModelConfig
from .errors import ContractError, ShapeError
from .numerics import ComplexTensor, GradTape, Var

# Chunk size for frequency_contributions; K * N * D floats per window.
CONTRIBUTION_CHUNK = 4


class ParameterSet(Mapping):
    """Named real parameter tensors of one model.

    The transfer bank is stored as ``bank_re`` and ``bank_im`` of shape
    (L, K, D, D); fusion weights as ``fusion`` of shape (L, K).
    """

    def __init__(self, tensors: Mapping[str, np.ndarray]):
        self._tensors = {
            name: np.asarray(value) for name, value in tensors.items()
        }
        for name, value in self._tensors.items():
            nx.ensure_finite(value, f"parameter {name}")

    def __getitem__(self, name: str) -> np.ndarray:
        return self._tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def __repr__(self) -> str:
        shapes = ", ".join(
            f"{name}={value.shape}" for name, value in self.items()
        )
        return f"ParameterSet({shapes})"

    @property
    def bank(self) -> ComplexTensor:
        return ComplexTensor(self["bank_re"], self["bank_im"])

    @property
    def fusion(self) -> np.ndarray:
        return self["fusion"]

    @property
    def count(self) -> int:
        """Number of real scalars (complex entries count twice)."""
        return int(sum(value.size for value in self.values()))

    def replace(self, **changes: np.ndarray) -> ParameterSet:
        unknown = set(changes) - set(self)
        if unknown:
            raise ContractError(f"unknown parameters {sorted(unknown)}")
        return ParameterSet({**self._tensors, **changes})

    def astype(self, dtype) -> ParameterSet:
        return ParameterSet(
            {name: value.astype(dtype) for name, value in self.items()}
        )

    def copy(self) -> ParameterSet:
        return ParameterSet(
            {name: value.copy() for name, value in self.items()}
        )


def _affine_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    c, d, h = cfg.channels, cfg.dim, cfg.hidden
    if h == 0:
        return {
            "embed_w": (c, d),
            "embed_b": (d,),
            "proj_w": (d, c),
            "proj_b": (c,),
        }
    return {
        "embed_w": (c, h),
        "embed_b": (h,),
        "embed_out_w": (h, d),
        "embed_out_b": (d,),
        "proj_w": (d, h),
        "proj_b": (h,),
        "proj_out_w": (h, c),
        "proj_out_b": (c,),
    }


def parameter_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Name to shape for every tensor of a model built from ``cfg``."""
    shapes = _affine_shapes(cfg)
    bank = (cfg.layers, cfg.bins, cfg.dim, cfg.dim)
    shapes["bank_re"] = bank
    shapes["bank_im"] = bank
    shapes["fusion"] = (cfg.layers, cfg.bins)
    return shapes


def expected_parameter_count(cfg: ModelConfig) -> int:
    """Closed-form parameter count.

    affine(C, D) + L * K * D * D * 2 + L * K + affine(D, C) for the
    single-layer maps.
    """
    c, d, h, n_l, k = (
        cfg.channels,
        cfg.dim,
        cfg.hidden,
        cfg.layers,
        cfg.bins,
    )
    if h == 0:
        maps = (c * d + d) + (d * c + c)
    else:
        maps = (c * h + h) + (h * d + d) + (d * h + h) + (h * c + c)
    return maps + n_l * k * d * d * 2 + n_l * k


def init_parameters(cfg: ModelConfig, seed: int) -> ParameterSet:
    """Seeded initialization.

    Affine weights and biases are uniform in +-1/sqrt(fan_in), the real
    and imaginary parts of the transfer bank uniform in +-1/sqrt(D), and
    every fusion weight starts at one.
    """
    rng = nx.counter_rng(seed, 0)
    tensors = {}
    for name, shape in parameter_shapes(cfg).items():
        if name == "fusion":
            tensors[name] = np.ones(shape)
            continue
        if name.startswith("bank"):
            bound = 1.0 / np.sqrt(cfg.dim)
        elif name.endswith("_w"):
            bound = 1.0 / np.sqrt(shape[0])
        else:
            bound = 1.0 / np.sqrt(_fan_in(cfg, name))
        tensors[name] = rng.uniform(-bound, bound, size=shape)
    return ParameterSet(tensors).astype(cfg.dtype)


def _fan_in(cfg: ModelConfig, bias_name: str) -> int:
    weight = bias_name[: -len("_b")] + "_w"
    return parameter_shapes(cfg)[weight][0]


def identity_bank(params: ParameterSet) -> ParameterSet:
    """Copy of ``params`` with every H[l, m] set to the identity."""
    n_l, k, d, _ = params["bank_re"].shape
    eye = np.broadcast_to(np.eye(d), (n_l, k, d, d))
    dtype = params["bank_re"].dtype
    return params.replace(
        bank_re=eye.astype(dtype),
        bank_im=np.zeros((n_l, k, d, d), dtype=dtype),
    )


# -- differentiable building blocks ----------------------------------------


def _dropout(x: Var, rate: float, training: bool, rng) -> Var:
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ContractError("training with dropout needs a random generator")
    keep = rng.random(x.shape) >= rate
    mask = keep.astype(x.value.dtype) / (1.0 - rate)
    return nx.mul(x, nx.constant(mask))


def _embed(x, theta: Mapping, hidden: int) -> Var:
    out = nx.affine(x, theta["embed_w"], theta["embed_b"])
    if hidden:
        out = nx.affine(
            nx.tanh(out), theta["embed_out_w"], theta["embed_out_b"]
        )
    return out


def _project(m, theta: Mapping, hidden: int) -> Var:
    out = nx.affine(m, theta["proj_w"], theta["proj_b"])
    if hidden:
        out = nx.affine(
            nx.tanh(out), theta["proj_out_w"], theta["proj_out_b"]
        )
    return out


def _check_layer(theta: Mapping, layer: int) -> None:
    layers = np.shape(_value(theta["fusion"]))[0]
    if not 0 <= layer < layers:
        raise ContractError(f"layer {layer} outside [0, {layers})")


def _value(x) -> np.ndarray:
    return x.value if isinstance(x, Var) else np.asarray(x)


def _transfer(theta: Mapping, index) -> Var:
    return nx.complex_pair(
        nx.take(theta["bank_re"], index), nx.take(theta["bank_im"], index)
    )


def _fdblock_fast(m, layer: int, theta: Mapping) -> Var:
    _check_layer(theta, layer)
    n = np.shape(_value(m))[-2]
    spec = nx.rdft(m)
    bins = spec.shape[-2]
    moved = nx.bin_vecmat(spec, _transfer(theta, layer))
    weights = nx.reshape(nx.take(theta["fusion"], layer), (bins, 1))
    return nx.irdft(nx.mul(moved, weights), n)


def _fdblock_naive(m, layer: int, theta: Mapping) -> Var:
    _check_layer(theta, layer)
    n = np.shape(_value(m))[-2]
    spec = nx.rdft(m)
    terms = []
    for k in range(spec.shape[-2]):
        row = (Ellipsis, slice(k, k + 1), slice(None))
        moved = nx.matmul(nx.take(spec, row), _transfer(theta, (layer, k)))
        alone = nx.place(moved, row, spec.shape)
        series = nx.irdft(alone, n)
        terms.append(nx.mul(series, nx.take(theta["fusion"], (layer, k))))
    return nx.add_all(terms)


_BLOCKS = {"fast": _fdblock_fast, "naive": _fdblock_naive}


def _forward(x, theta: Mapping, cfg: ModelConfig, training, rng) -> Var:
    xv = _value(x)
    if xv.shape[-2:] != (cfg.lookback, cfg.channels):
        raise ShapeError(
            f"expected windows of shape (..., {cfg.lookback}, "
            f"{cfg.channels}), got {xv.shape}"
        )
    padded = nx.pad_rows(x, cfg.horizon)
    hidden = _dropout(
        _embed(padded, theta, cfg.hidden), cfg.dropout, training, rng
    )
    block = _BLOCKS[cfg.block_mode]
    for layer in range(cfg.layers):
        hidden = _dropout(
            block(hidden, layer, theta), cfg.dropout, training, rng
        )
    out = _project(hidden, theta, cfg.hidden)
    rows = (Ellipsis, slice(cfg.lookback, None), slice(None))
    return nx.take(out, rows)


# -- public array API -------------------------------------------------------


def embed(
    x,
    params: Mapping,
    hidden: int = 0,
    dropout: float = 0.0,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Per-time-step map from C channels to D features.

    In training mode ``dropout`` is applied to the output with draws from
    ``rng``.
    """
    out = _embed(np.asarray(x), params, hidden)
    return _dropout(out, dropout, training, rng).value


def fdblock_forward_naive(m, layer: int, params: Mapping) -> np.ndarray:
    """FDBlock as a per-frequency loop with fusion in the time domain."""
    return _fdblock_naive(np.asarray(m), layer, params).value


def fdblock_forward_fast(m, layer: int, params: Mapping) -> np.ndarray:
    """FDBlock with fusion applied to the spectrum before one inverse."""
    return _fdblock_fast(np.asarray(m), layer, params).value


def forward(
    x,
    params: Mapping,
    cfg: ModelConfig,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Forecast S rows from (..., T, C) windows."""
    x = np.asarray(x, dtype=cfg.dtype)
    return _forward(x, params, cfg, training, rng).value


def loss_and_gradients(
    params: Mapping,
    x,
    y,
    cfg: ModelConfig,
    training: bool = False,
    rng: np.random.Generator | None = None,
    frozen: frozenset[str] | tuple[str, ...] = (),
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean squared error of one batch and its gradient.

    Parameters named in ``frozen`` enter as constants and get no entry in
    the gradient map.
    """
    x = np.asarray(x, dtype=cfg.dtype)
    y = np.asarray(y, dtype=cfg.dtype)
    tape = GradTape()
    theta = {
        name: value if name in frozen else tape.leaf(name, value)
        for name, value in params.items()
    }
    pred = _forward(x, theta, cfg, training, rng)
    if pred.shape != y.shape:
        raise ShapeError(f"forecast {pred.shape} vs target {y.shape}")
    loss = nx.mean(nx.square(nx.sub(pred, y)))
    if loss.tape is None:
        raise ContractError("every parameter is frozen")
    grads = tape.backward(loss)
    return float(loss.value), grads


def _last_block_input(x: np.ndarray, params: Mapping, cfg: ModelConfig):
    hidden = _embed(nx.pad_rows(x, cfg.horizon), params, cfg.hidden)
    block = _BLOCKS[cfg.block_mode]
    for layer in range(cfg.layers - 1):
        hidden = block(hidden, layer, params)
    return hidden.value


def isolated_forecasts(x, params: Mapping, cfg: ModelConfig) -> np.ndarray:
    """Forecast from each final-layer frequency on its own.

    Entry m of axis -3 is ``g(W[L-1, m] * Z[m])`` over the last S rows,
    where Z[m] is bin m of the transferred spectrum mapped back to the
    time domain. Returns shape (..., K, S, C).
    """
    x = np.asarray(x, dtype=cfg.dtype)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[None]
    out = []
    for start in range(0, x.shape[0], CONTRIBUTION_CHUNK):
        chunk = x[start : start + CONTRIBUTION_CHUNK]
        out.append(_isolated_chunk(chunk, params, cfg))
    result = np.concatenate(out, axis=0)
    return result[0] if squeeze else result


def _isolated_chunk(x, params: Mapping, cfg: ModelConfig) -> np.ndarray:
    last = cfg.layers - 1
    hidden = _last_block_input(x, params, cfg)
    spec = nx.rdft(hidden).value
    h = ComplexTensor(params["bank_re"][last], params["bank_im"][last])
    moved = spectral.Spectrum.from_complex(
        np.einsum("bkd,kde->bke", spec, h.to_complex()), cfg.length
    )
    forecasts = []
    for k in range(cfg.bins):
        z = spectral.single_bin_inverse(moved, k)[:, cfg.lookback :, :]
        z = params["fusion"][last, k] * z
        forecasts.append(_project(z, params, cfg.hidden).value)
    return np.stack(forecasts, axis=1)


def frequency_contributions(
    x, params: Mapping, cfg: ModelConfig
) -> np.ndarray:
    """Per-bin final-layer contributions, shape (..., K, S, C).

    Each entry is the isolated forecast minus the projection of a zero
    series, so with affine maps the contributions plus that bias path sum
    to :func:`forward`.
    """
    isolated = isolated_forecasts(x, params, cfg)
    zero = np.zeros((1, cfg.dim), dtype=cfg.dtype)
    return isolated - _project(zero, params, cfg.hidden).value


def per_frequency_losses(
    params: Mapping, x, y, cfg: ModelConfig
) -> np.ndarray:
    """Loss of every isolated final-layer forecast, shape (K,).

    Entry m is the mean squared error between ``g(W[L-1, m] * Z[m])`` and
    the targets, averaged over windows, rows and channels.
    """
    y = np.asarray(y, dtype=np.float64)
    isolated = isolated_forecasts(x, params, cfg)
    if y.ndim == 2:
        return np.mean((isolated - y[None]) ** 2, axis=(-2, -1))
    return np.mean((isolated - y[:, None]) ** 2, axis=(0, 2, 3))
