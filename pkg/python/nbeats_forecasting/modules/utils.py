import enum
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from nbeats_forecasting.modules.tape import EAGER, EagerOps, GradientTape, Node, Operand, value_of


class Activation(str, enum.Enum):
    RELU = "relu"
    IDENTITY = "identity"


def activation(name: Union[str, Activation]) -> Activation:
    try:
        return Activation(name)
    except ValueError:
        raise ValueError(f"unknown activation {name}")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class DenseLayer:
    """

    Fully connected layer computing activation(W x + b).
    Weight has shape [out x in], bias has shape [out].

    """
    weight: np.ndarray
    bias: np.ndarray
    activation: Activation = Activation.RELU

    def __post_init__(self):
        weight = _frozen(self.weight)
        bias = _frozen(self.bias)
        if weight.ndim != 2 or bias.ndim != 1 or bias.shape[0] != weight.shape[0]:
            raise ValueError(f"weight of shape {weight.shape} does not match bias of shape {bias.shape}")
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "bias", bias)
        object.__setattr__(self, "activation", activation(self.activation))

    @property
    def in_features(self) -> int:
        return self.weight.shape[1]

    @property
    def out_features(self) -> int:
        return self.weight.shape[0]


def glorot_uniform(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    """

    Uniform initialization in +-sqrt(6 / (fan_in + fan_out)).

    >>> w = glorot_uniform(np.random.default_rng(0), 4, 2)
    >>> w.shape, bool(np.all(np.abs(w) <= 1.0))
    ((4, 2), True)

    """
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def dense_layer(
    rng: np.random.Generator,
    in_features: int,
    out_features: int,
    act: Union[str, Activation] = Activation.RELU
) -> DenseLayer:
    return DenseLayer(
        weight=glorot_uniform(rng, out_features, in_features),
        bias=np.zeros(out_features),
        activation=activation(act)
    )


def forward_dense(
    layer: DenseLayer,
    x: Operand,
    tape: Optional[Union[GradientTape, EagerOps]] = None,
    name: Optional[str] = None
) -> Union[Node, np.ndarray]:
    """

    Applies a dense layer to a vector [in] or a batch of row vectors [B x in].
    If a name is given and a tape is used, the weights are watched under
    '<name>.weight' and '<name>.bias' so gradients are reported for them.

    >>> layer = DenseLayer(np.array([[2.0]]), np.array([1.0]), Activation.IDENTITY)
    >>> forward_dense(layer, np.array([3.0])).tolist()
    [7.0]
    >>> layer = DenseLayer(np.eye(2), np.zeros(2))
    >>> forward_dense(layer, np.array([1.0, -1.0])).tolist()
    [1.0, 0.0]

    """
    ops = tape if tape is not None else EAGER
    in_shape = value_of(x).shape
    if len(in_shape) == 0 or in_shape[-1] != layer.in_features:
        raise ValueError(
            f"input of shape {in_shape} does not match layer weight of shape {layer.weight.shape}"
        )
    if name is not None:
        weight = ops.watch(f"{name}.weight", layer.weight)
        bias = ops.watch(f"{name}.bias", layer.bias)
    else:
        weight, bias = layer.weight, layer.bias
    h = ops.add(ops.matmul(x, weight, transpose_b=True), bias)
    if layer.activation == Activation.RELU:
        h = ops.relu(h)
    return h
