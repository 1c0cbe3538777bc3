import collections
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from nbeats_forecasting.modules.tape import EAGER, EagerOps, GradientTape, Node, Operand, value_of
from nbeats_forecasting.modules.utils import (
    Activation,
    DenseLayer,
    activation,
    dense_layer,
    forward_dense,
    glorot_uniform
)

__all__ = [
    "LOOKBACK_MULTIPLES",
    "ModelConfig",
    "BlockWeights",
    "NBeatsModel",
    "ForwardTrace",
    "block_trunk",
    "block_forward",
    "model_forward",
    "scaled_forecast",
    "build_model"
]

LOOKBACK_MULTIPLES = (2, 3, 4, 5, 6, 7)

Ops = Union[GradientTape, EagerOps]


@dataclass(frozen=True)
class ModelConfig:
    """

    Topology of a generic N-BEATS network. The lookback is given as a
    multiple of the horizon, so the input window has lookback * horizon points.

    >>> ModelConfig(horizon=6).input_size
    12
    >>> cfg = ModelConfig(horizon=6)
    >>> cfg.block_count, cfg.layers, cfg.width
    (30, 4, 512)

    """
    horizon: int
    lookback: int = 2
    block_count: int = 30
    layers: int = 4
    width: int = 512
    share_weights: bool = False
    activation: Activation = Activation.RELU

    def __post_init__(self):
        object.__setattr__(self, "activation", activation(self.activation))
        if self.horizon < 1:
            raise ValueError(f"horizon must be at least 1, but got {self.horizon}")
        if self.lookback not in LOOKBACK_MULTIPLES:
            raise ValueError(f"lookback must be one of {LOOKBACK_MULTIPLES} horizons, but got {self.lookback}")
        if self.block_count < 1:
            raise ValueError(f"block count must be at least 1, but got {self.block_count}")
        if self.layers < 1 or self.width < 1:
            raise ValueError(f"expected at least one layer of width >= 1, but got {self.layers} layers of width {self.width}")

    @property
    def input_size(self) -> int:
        return self.lookback * self.horizon


@dataclass(frozen=True)
class BlockWeights:
    fc_layers: Tuple[DenseLayer, ...]
    # Q: [t x width]
    backcast_head: np.ndarray
    # G: [H x width]
    forecast_head: np.ndarray

    def __post_init__(self):
        layers = tuple(self.fc_layers)
        if len(layers) == 0:
            raise ValueError("a block needs at least one fully connected layer")
        for prev, layer in zip(layers, layers[1:]):
            if layer.in_features != prev.out_features:
                raise ValueError(
                    f"layer weight of shape {layer.weight.shape} does not follow layer weight of shape {prev.weight.shape}"
                )
        width = layers[-1].out_features
        heads = []
        for name, head in [("backcast", self.backcast_head), ("forecast", self.forecast_head)]:
            head = np.array(head, dtype=np.float64)
            if head.ndim != 2 or head.shape[1] != width:
                raise ValueError(f"{name} head of shape {head.shape} does not match trunk width {width}")
            head.flags.writeable = False
            heads.append(head)
        if heads[0].shape[0] != layers[0].in_features:
            raise ValueError(
                f"backcast head of shape {heads[0].shape} does not match input size {layers[0].in_features}"
            )
        object.__setattr__(self, "fc_layers", layers)
        object.__setattr__(self, "backcast_head", heads[0])
        object.__setattr__(self, "forecast_head", heads[1])

    @property
    def input_size(self) -> int:
        return self.fc_layers[0].in_features

    @property
    def horizon(self) -> int:
        return self.forecast_head.shape[0]


@dataclass(frozen=True)
class NBeatsModel:
    """

    L blocks chained by the doubly residual recursion. A shared model
    stores a single block that is applied L times.

    """
    config: ModelConfig
    blocks: Tuple[BlockWeights, ...]
    seed: Optional[int] = None

    def __post_init__(self):
        blocks = tuple(self.blocks)
        expected = 1 if self.config.share_weights else self.config.block_count
        if len(blocks) != expected:
            raise ValueError(f"expected {expected} stored blocks, but got {len(blocks)}")
        for i, block in enumerate(blocks):
            if block.input_size != self.config.input_size or block.horizon != self.config.horizon:
                raise ValueError(
                    f"block {i} maps {block.input_size} inputs to {block.horizon} outputs, expected "
                    f"{self.config.input_size} inputs and {self.config.horizon} outputs"
                )
        object.__setattr__(self, "blocks", blocks)

    @property
    def share_weights(self) -> bool:
        return self.config.share_weights

    @property
    def horizon(self) -> int:
        return self.config.horizon

    @property
    def lookback(self) -> int:
        return self.config.lookback

    @property
    def input_size(self) -> int:
        return self.config.input_size

    @property
    def block_count(self) -> int:
        return self.config.block_count

    def block(self, index: int) -> BlockWeights:
        if not 0 <= index < self.block_count:
            raise IndexError(f"block index {index} out of range for {self.block_count} blocks")
        return self.blocks[0] if self.share_weights else self.blocks[index]

    def parameters(self) -> Dict[str, np.ndarray]:
        params = collections.OrderedDict()
        for i, block in enumerate(self.blocks):
            for k, layer in enumerate(block.fc_layers):
                params[f"blocks.{i}.fc.{k}.weight"] = layer.weight
                params[f"blocks.{i}.fc.{k}.bias"] = layer.bias
            params[f"blocks.{i}.backcast"] = block.backcast_head
            params[f"blocks.{i}.forecast"] = block.forecast_head
        return params

    def with_parameters(self, params: Dict[str, np.ndarray]) -> "NBeatsModel":
        """

        Returns a new model with the same topology and the given parameter values.

        """
        current = self.parameters()
        missing = sorted(set(current) - set(params))
        unknown = sorted(set(params) - set(current))
        if missing or unknown:
            raise ValueError(f"parameter names do not match the model, missing {missing}, unknown {unknown}")
        for name, value in params.items():
            if np.shape(value) != current[name].shape:
                raise ValueError(f"parameter {name} has shape {np.shape(value)}, expected {current[name].shape}")
        blocks = []
        for i, block in enumerate(self.blocks):
            layers = tuple(
                DenseLayer(
                    weight=params[f"blocks.{i}.fc.{k}.weight"],
                    bias=params[f"blocks.{i}.fc.{k}.bias"],
                    activation=layer.activation
                )
                for k, layer in enumerate(block.fc_layers)
            )
            blocks.append(BlockWeights(layers, params[f"blocks.{i}.backcast"], params[f"blocks.{i}.forecast"]))
        return replace(self, blocks=tuple(blocks))

    def with_activation(self, act: Union[str, Activation]) -> "NBeatsModel":
        act = activation(act)
        blocks = tuple(
            replace(block, fc_layers=tuple(replace(layer, activation=act) for layer in block.fc_layers))
            for block in self.blocks
        )
        return replace(self, config=replace(self.config, activation=act), blocks=blocks)


@dataclass
class ForwardTrace:
    # x_1 .. x_L, the input of every block
    inputs: List[np.ndarray] = field(default_factory=list)
    backcasts: List[np.ndarray] = field(default_factory=list)
    partial_forecasts: List[np.ndarray] = field(default_factory=list)
    forecast: Optional[np.ndarray] = None
    # x_{L+1}, what is left after the last backcast
    residual: Optional[np.ndarray] = None
    # set when the forward pass was recorded on a gradient tape
    forecast_node: Optional[Node] = None


def block_trunk(
    w: BlockWeights,
    x: Operand,
    tape: Optional[Ops] = None,
    prefix: Optional[str] = None
) -> Union[Node, np.ndarray]:
    """

    Output h_K of the fully connected trunk of a block.

    """
    h = x
    for k, layer in enumerate(w.fc_layers):
        h = forward_dense(layer, h, tape, name=None if prefix is None else f"{prefix}.fc.{k}")
    return h


def block_forward(
    w: BlockWeights,
    x: Operand,
    tape: Optional[Ops] = None,
    prefix: Optional[str] = None
) -> Tuple[Union[Node, np.ndarray], Union[Node, np.ndarray]]:
    """

    Backcast Q h_K and forecast G h_K of a single block. Accepts a window [t]
    or a batch of windows [B x t].

    >>> block = build_model(ModelConfig(horizon=1, block_count=1, width=3), seed=0).block(0)
    >>> backcast, forecast = block_forward(block, np.ones(2))
    >>> backcast.shape, forecast.shape
    ((2,), (1,))

    """
    ops = tape if tape is not None else EAGER
    in_shape = value_of(x).shape
    if len(in_shape) == 0 or in_shape[-1] != w.input_size:
        raise ValueError(f"input of shape {in_shape} does not match block input size {w.input_size}")
    h = block_trunk(w, x, ops, prefix)
    if prefix is not None:
        q = ops.watch(f"{prefix}.backcast", w.backcast_head)
        g = ops.watch(f"{prefix}.forecast", w.forecast_head)
    else:
        q, g = w.backcast_head, w.forecast_head
    return ops.matmul(h, q, transpose_b=True), ops.matmul(h, g, transpose_b=True)


def model_forward(
    m: NBeatsModel,
    x: Operand,
    tape: Optional[GradientTape] = None,
    watch_input: bool = False
) -> ForwardTrace:
    """

    Runs the doubly residual stack on a window [t] or a batch of windows [B x t].
    With a tape, all parameters are watched under their parameter names and
    the final forecast node is kept in the trace.

    >>> model = build_model(ModelConfig(horizon=2, block_count=3, width=4), seed=1)
    >>> trace = model_forward(model, np.arange(4.0))
    >>> len(trace.inputs), trace.forecast.shape
    (3, (2,))

    """
    ops: Ops = tape if tape is not None else EAGER
    if tape is not None and watch_input:
        x = tape.watch("input", value_of(x))
    x_val = value_of(x)
    if x_val.ndim not in {1, 2} or x_val.shape[-1] != m.input_size:
        raise ValueError(f"input of shape {x_val.shape} does not match model input size {m.input_size}")
    if not np.all(np.isfinite(x_val)):
        raise ValueError("model input contains non-finite values")

    trace = ForwardTrace()
    residual = x
    forecast = None
    for i in range(m.block_count):
        block_idx = 0 if m.share_weights else i
        prefix = f"blocks.{block_idx}" if tape is not None else None
        backcast, partial = block_forward(m.block(i), residual, ops, prefix)
        if not (np.all(np.isfinite(value_of(backcast))) and np.all(np.isfinite(value_of(partial)))):
            raise RuntimeError(f"block {i} produced non-finite outputs")
        trace.inputs.append(value_of(residual))
        trace.backcasts.append(value_of(backcast))
        trace.partial_forecasts.append(value_of(partial))
        forecast = partial if forecast is None else ops.add(forecast, partial)
        residual = ops.sub(residual, backcast)

    trace.forecast = value_of(forecast)
    trace.residual = value_of(residual)
    if tape is not None:
        trace.forecast_node = forecast
    return trace


def _window_scale(window: np.ndarray) -> np.ndarray:
    scale = np.max(window, axis=-1, keepdims=True)
    return np.where(scale == 0, 1.0, scale)


def scaled_forecast(m: NBeatsModel, window: np.ndarray) -> np.ndarray:
    """

    Forecast of the model with the input divided by the window maximum and
    the output multiplied by it. A zero maximum uses a scale of 1.

    >>> model = build_model(ModelConfig(horizon=2, block_count=2, width=4), seed=0)
    >>> x = np.array([1.0, 3.0, 2.0, 4.0])
    >>> bool(np.allclose(scaled_forecast(model, 8 * x), 8 * scaled_forecast(model, x), rtol=1e-12))
    True

    """
    window = np.asarray(window, dtype=np.float64)
    if window.shape[-1] != m.input_size:
        raise ValueError(f"window of shape {window.shape} does not match model input size {m.input_size}")
    scale = _window_scale(window)
    return scale * model_forward(m, window / scale).forecast


def _build_block(cfg: ModelConfig, rng: np.random.Generator) -> BlockWeights:
    layers = []
    in_features = cfg.input_size
    for _ in range(cfg.layers):
        layers.append(dense_layer(rng, in_features, cfg.width, cfg.activation))
        in_features = cfg.width
    return BlockWeights(
        fc_layers=tuple(layers),
        backcast_head=glorot_uniform(rng, cfg.input_size, cfg.width),
        forecast_head=glorot_uniform(rng, cfg.horizon, cfg.width)
    )


def build_model(cfg: ModelConfig, seed: int) -> NBeatsModel:
    """

    Builds a model with weights drawn deterministically from the seed.

    >>> cfg = ModelConfig(horizon=2, block_count=5, width=8, share_weights=True)
    >>> len(build_model(cfg, seed=3).blocks)
    1

    """
    rng = np.random.default_rng(seed)
    num_stored = 1 if cfg.share_weights else cfg.block_count
    return NBeatsModel(
        config=cfg,
        blocks=tuple(_build_block(cfg, rng) for _ in range(num_stored)),
        seed=seed
    )
