"""

Numerical checks of the meta-learning reading of the doubly residual stack:
the input shifts a stack generates, the first order linearization of a
shared-weights stack in the backcast magnitude, and the closed form the
stack collapses to when the trunk is linear.

"""
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from einops import rearrange

from nbeats_forecasting import logging
from nbeats_forecasting.modules.nbeats import (
    BlockWeights,
    ForwardTrace,
    ModelConfig,
    NBeatsModel,
    block_trunk,
    build_model,
    model_forward
)
from nbeats_forecasting.modules.utils import Activation

__all__ = [
    "ShiftSequence",
    "JacobianEstimate",
    "EffectiveProjection",
    "LinearizationResult",
    "LinearizationOrder",
    "CollapseCheck",
    "extract_shifts",
    "jacobian_f",
    "linearized_forecast",
    "linearization_order",
    "trunk_affine",
    "linear_collapse_check",
    "neumann_partial_sums",
    "neumann_limit",
    "run_diagnostics"
]

DIAGNOSTICS_SCHEMA_VERSION = 1
DEFAULT_SCALES = (1e-1, 1e-2, 1e-3)
KINK_THRESHOLD = 1e-6
JITTER = 1e-4
MAX_JITTERS = 3

_LOGGER = logging.get_logger("DIAGNOSTICS")


@dataclass(frozen=True)
class ShiftSequence:
    # mu_0 .. mu_L, mu_0 is all zeros
    shifts: Tuple[np.ndarray, ...]

    def __len__(self) -> int:
        return len(self.shifts)

    @property
    def block_count(self) -> int:
        return len(self.shifts) - 1

    def recursion_error(self, backcasts: Sequence[np.ndarray]) -> float:
        """

        Largest deviation between the shifts and the running sum of backcasts.

        """
        if len(backcasts) != self.block_count:
            raise ValueError(f"got {len(backcasts)} backcasts for {self.block_count} shifts")
        running = np.zeros_like(self.shifts[0])
        error = 0.0
        for mu, backcast in zip(self.shifts[1:], backcasts):
            running = running + backcast
            error = max(error, float(np.max(np.abs(mu - running))))
        return error


@dataclass(frozen=True)
class JacobianEstimate:
    # [width x t]
    matrix: np.ndarray
    point: np.ndarray
    h: float
    jitters: int = 0
    scheme: str = "central"


@dataclass(frozen=True)
class EffectiveProjection:
    # G'_1 .. G'_L, each [H x width]
    matrices: Tuple[np.ndarray, ...]

    def __len__(self) -> int:
        return len(self.matrices)


@dataclass(frozen=True)
class LinearizationResult:
    linearized: np.ndarray
    full: np.ndarray
    residual: float
    projection: EffectiveProjection


@dataclass(frozen=True)
class LinearizationOrder:
    order: float
    scales: Tuple[float, ...]
    mean_residuals: Tuple[float, ...]
    samples: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "order": self.order,
            "scales": list(self.scales),
            "mean_residuals": list(self.mean_residuals),
            "samples": self.samples
        }


@dataclass(frozen=True)
class CollapseCheck:
    model_forecast: np.ndarray
    closed_form: np.ndarray

    @property
    def max_rel_diff(self) -> float:
        denom = max(float(np.max(np.abs(self.closed_form))), np.finfo(np.float64).tiny)
        return float(np.max(np.abs(self.model_forecast - self.closed_form))) / denom


def extract_shifts(trace: ForwardTrace) -> ShiftSequence:
    """

    Input shifts mu_l = x - x_{l+1} generated by the residual recursion.

    >>> model = build_model(ModelConfig(horizon=2, block_count=3, width=4), seed=0)
    >>> shifts = extract_shifts(model_forward(model, np.arange(1.0, 5.0)))
    >>> len(shifts), shifts.shifts[0].tolist()
    (4, [0.0, 0.0, 0.0, 0.0])

    """
    if len(trace.inputs) == 0 or trace.residual is None:
        raise ValueError("got an empty forward trace")
    x = trace.inputs[0]
    following = list(trace.inputs[1:]) + [trace.residual]
    return ShiftSequence(tuple([np.zeros_like(x)] + [x - nxt for nxt in following]))


def _trunk_with_preactivations(block: BlockWeights, x: np.ndarray) -> Tuple[np.ndarray, List[np.ndarray]]:
    h = x
    pre = []
    for layer in block.fc_layers:
        z = h @ layer.weight.T + layer.bias
        pre.append(z)
        h = np.maximum(z, 0.0) if layer.activation == Activation.RELU else z
    return h, pre


def _kink_free(block: BlockWeights, pre: List[np.ndarray]) -> bool:
    for layer, z in zip(block.fc_layers, pre):
        if layer.activation != Activation.RELU:
            continue
        base = z[0]
        if np.any(np.abs(base) < KINK_THRESHOLD):
            return False
        if np.any((z[1:] > 0) != (base > 0)[None, :]):
            return False
    return True


def jacobian_f(
    block: BlockWeights,
    x0: np.ndarray,
    h: float = 1e-5,
    rng: Optional[np.random.Generator] = None
) -> JacobianEstimate:
    """

    Central difference Jacobian of the fully connected trunk of a block. If a
    pre-activation at x0 is within 1e-6 of a ReLU kink, or a kink lies inside
    the difference stencil, the point is jittered by up to 1e-4 * max(1, |x0|_inf);
    after three unsuccessful jitters a RuntimeError is raised.

    :param block: block whose trunk is differentiated
    :param x0: evaluation point [t]
    :param h: difference step
    :param rng: generator for the jitter, defaults to a generator seeded with 0
    :return: Jacobian estimate at the (possibly jittered) point
    """
    x0 = np.asarray(x0, dtype=np.float64)
    t = block.input_size
    if x0.shape != (t,):
        raise ValueError(f"point of shape {x0.shape} does not match block input size {t}")
    if rng is None:
        rng = np.random.default_rng(0)
    stencil = h * np.eye(t)
    point = x0
    for attempt in range(MAX_JITTERS + 1):
        inputs = np.concatenate([point[None, :], point + stencil, point - stencil])
        out, pre = _trunk_with_preactivations(block, inputs)
        if _kink_free(block, pre):
            # rows of the stencil are input directions, the jacobian is [width x t]
            matrix = rearrange(out[1:t + 1] - out[t + 1:], "direction unit -> unit direction") / (2 * h)
            return JacobianEstimate(matrix, point, h, jitters=attempt)
        if attempt < MAX_JITTERS:
            point = x0 + rng.uniform(-1.0, 1.0, size=t) * JITTER * max(1.0, float(np.max(np.abs(x0))))
    raise RuntimeError(f"could not move away from a ReLU kink after {MAX_JITTERS} jitters")


def _scaled_backcast(model: NBeatsModel, factor: float) -> NBeatsModel:
    if not model.share_weights:
        raise ValueError("linearization needs a shared-weights model")
    block = model.block(0)
    return replace(model, blocks=(replace(block, backcast_head=block.backcast_head * factor),))


def linearized_forecast(
    model: NBeatsModel,
    x: np.ndarray,
    eps_scale: float = 1.0,
    rng: Optional[np.random.Generator] = None
) -> LinearizationResult:
    """

    Compares the forecast of a shared-weights model whose backcast head is
    multiplied by eps_scale with its first order expansion around the
    unshifted input, sum_l G'_l f(x), where G'_1 = G and
    G'_l = G'_{l-1} (I - J_f(x_{l-1}) Q) along the actual block inputs.

    :param model: shared-weights model
    :param x: input window [t]
    :param eps_scale: factor applied to the backcast head
    :param rng: generator for Jacobian jitter
    :return: linearized and full forecast with their max-abs residual
    """
    x = np.asarray(x, dtype=np.float64)
    scaled = _scaled_backcast(model, eps_scale)
    block = scaled.block(0)
    trace = model_forward(scaled, x)
    q = block.backcast_head
    identity = np.eye(q.shape[1])

    matrices = [block.forecast_head]
    for i in range(1, scaled.block_count):
        jacobian = jacobian_f(block, trace.inputs[i - 1], rng=rng).matrix
        matrices.append(matrices[-1] @ (identity - jacobian @ q))

    # same product and summation order as the model so Q = 0 reproduces it exactly
    fx = block_trunk(block, x)
    linearized = None
    for g in matrices:
        term = fx @ g.T
        linearized = term if linearized is None else linearized + term
    residual = float(np.max(np.abs(trace.forecast - linearized)))
    return LinearizationResult(linearized, trace.forecast, residual, EffectiveProjection(tuple(matrices)))


def _normalize_backcast(model: NBeatsModel, xs: np.ndarray) -> NBeatsModel:
    # rescale Q so the backcast of the probes has the norm of the probes
    block = model.block(0)
    backcasts = block_trunk(block, xs) @ block.backcast_head.T
    backcast_norm = float(np.mean(np.linalg.norm(backcasts, axis=-1)))
    if backcast_norm == 0:
        return model
    return _scaled_backcast(model, float(np.mean(np.linalg.norm(xs, axis=-1))) / backcast_norm)


def linearization_order(
    models: Sequence[NBeatsModel],
    probes: int = 20,
    scales: Sequence[float] = DEFAULT_SCALES,
    seed: int = 0
) -> LinearizationOrder:
    """

    Measures how fast the linearization residual shrinks with the backcast
    magnitude. Each model's backcast head is normalized first, then the
    residual is averaged over probes and models for every scale and the
    slope of a log-log line fit is returned as the order.

    :param models: shared-weights models with equal input size
    :param probes: random windows per model
    :param scales: backcast scales
    :param seed: seed for the probe windows
    :return: measured order with the residual table
    """
    if len(models) == 0:
        raise ValueError("got no models")
    if len(scales) < 2:
        raise ValueError(f"need at least two scales for a line fit, but got {len(scales)}")
    rng = np.random.default_rng(seed)
    residuals = np.zeros((len(scales), len(models) * probes))
    for m, model in enumerate(models):
        xs = rng.uniform(0.5, 1.5, size=(probes, model.input_size))
        normalized = _normalize_backcast(model, xs)
        for s, scale in enumerate(scales):
            for p, x in enumerate(xs):
                residuals[s, m * probes + p] = linearized_forecast(normalized, x, scale, rng=rng).residual
        _LOGGER.debug(f"measured residuals of model {m + 1}/{len(models)}")

    means = residuals.mean(axis=1)
    measurable = means > 0
    if measurable.sum() < 2:
        raise RuntimeError(f"got measurable residuals for only {int(measurable.sum())} of {len(scales)} scales")
    slope, _ = np.polyfit(np.log10(np.asarray(scales)[measurable]), np.log10(means[measurable]), deg=1)
    _LOGGER.info(f"linearization residual order {slope:.3f} over scales {list(scales)}")
    return LinearizationOrder(float(slope), tuple(float(s) for s in scales), tuple(float(v) for v in means), residuals.shape[1])


def trunk_affine(block: BlockWeights) -> Tuple[np.ndarray, np.ndarray]:
    """

    Folds a trunk of Identity layers into f(x) = F x + c.

    :param block: block with Identity activations only
    :return: F [width x t] and c [width]
    """
    if any(layer.activation != Activation.IDENTITY for layer in block.fc_layers):
        raise ValueError("folding the trunk needs Identity activations in every layer")
    f = np.eye(block.input_size)
    c = np.zeros(block.input_size)
    for layer in block.fc_layers:
        f = layer.weight @ f
        c = layer.weight @ c + layer.bias
    return f, c


def linear_collapse_check(model: NBeatsModel, x: np.ndarray) -> CollapseCheck:
    """

    Forward pass of a shared-weights model with a linear trunk against the
    closed form sum_{l=1..L} G (I - F Q)^{l-1} (F x + c).

    >>> cfg = ModelConfig(horizon=2, block_count=4, width=6, share_weights=True, activation="identity")
    >>> check = linear_collapse_check(build_model(cfg, seed=0), np.arange(1.0, 5.0))
    >>> check.max_rel_diff < 1e-9
    True

    """
    if not model.share_weights:
        raise ValueError("the closed form needs a shared-weights model")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.input_size,):
        raise ValueError(f"input of shape {x.shape} does not match model input size {model.input_size}")
    block = model.block(0)
    f, c = trunk_affine(block)
    q, g = block.backcast_head, block.forecast_head
    step = np.eye(f.shape[0]) - f @ q
    v = f @ x + c
    closed = g @ v
    for _ in range(1, model.block_count):
        v = step @ v
        closed = closed + g @ v
    return CollapseCheck(model_forward(model, x).forecast, closed)


def neumann_partial_sums(f: np.ndarray, q: np.ndarray, g: np.ndarray, x: np.ndarray, terms: int) -> np.ndarray:
    """

    Partial sums S_L = sum_{l=1..L} G (I - F Q)^{l-1} F x for L = 1 .. terms.

    :return: array [terms x H]
    """
    step = np.eye(f.shape[0]) - f @ q
    v = f @ x
    sums = []
    total = np.zeros(g.shape[0])
    for _ in range(terms):
        total = total + g @ v
        sums.append(total)
        v = step @ v
    return np.stack(sums)


def neumann_limit(f: np.ndarray, q: np.ndarray, g: np.ndarray, x: np.ndarray) -> np.ndarray:
    """

    Limit G (F Q)^+ F x of the partial sums when I - F Q contracts on the
    range of F.

    """
    return g @ np.linalg.pinv(f @ q) @ f @ x


def _zero_biases(model: NBeatsModel) -> NBeatsModel:
    params = {
        name: np.zeros_like(value) if name.endswith(".bias") else value
        for name, value in model.parameters().items()
    }
    return model.with_parameters(params)


def run_diagnostics(
    model: NBeatsModel,
    seed: int = 0,
    probes: int = 20,
    scales: Sequence[float] = DEFAULT_SCALES
) -> Dict[str, Any]:
    """

    Runs every diagnostic that applies to the model and returns a JSON
    serializable report. Linearization needs shared weights and is skipped
    otherwise; the linear collapse is checked on an Identity-activation
    shared-weights model of the same topology.

    :param model: model to diagnose
    :param seed: seed for probes and the collapse model
    :param probes: number of random probe windows
    :param scales: backcast scales for the linearization order
    :return: report mapping
    """
    rng = np.random.default_rng(seed)
    xs = rng.uniform(0.5, 1.5, size=(probes, model.input_size))

    shift_error = 0.0
    for x in xs:
        trace = model_forward(model, x)
        shift_error = max(shift_error, extract_shifts(trace).recursion_error(trace.backcasts))
    _LOGGER.info(f"max shift recursion error over {probes} probes: {shift_error:.3e}")

    report: Dict[str, Any] = {
        "schema_version": DIAGNOSTICS_SCHEMA_VERSION,
        "seed": seed,
        "probes": probes,
        "block_count": model.block_count,
        "share_weights": model.share_weights,
        "horizon": model.horizon,
        "input_size": model.input_size,
        "shift_recursion_error": shift_error
    }

    if model.share_weights:
        report["linearization"] = linearization_order([model], probes, scales, seed).to_dict()
    else:
        report["linearization"] = {"skipped": "linearization needs a shared-weights model"}
        _LOGGER.info("skipping linearization, the model does not share weights")

    linear_cfg = replace(model.config, activation=Activation.IDENTITY, share_weights=True)
    linear_model = _zero_biases(build_model(linear_cfg, seed))
    collapse = [linear_collapse_check(linear_model, x).max_rel_diff for x in xs]
    report["linear_collapse"] = {"max_rel_diff": float(max(collapse)), "block_count": linear_cfg.block_count}
    _LOGGER.info(f"linear collapse max relative difference {max(collapse):.3e}")
    return report
