import copy
from typing import Any, Dict, Optional, Union

import numpy as np

from nbeats_forecasting.metrics import EPS, TRAINING_LOSSES, Metric
from nbeats_forecasting.modules.tape import GradientTape, Node, Operand, value_of


def _as_rows(a: np.ndarray) -> np.ndarray:
    return a[None, :] if a.ndim == 1 else a


def mase_scales(
    insample: np.ndarray,
    y: np.ndarray,
    m: int,
    insample_mask: Optional[np.ndarray] = None
) -> np.ndarray:
    """

    Per row mean absolute seasonal difference over the unpadded history
    followed by the target. Rows with fewer than m + 1 values get scale 0.

    >>> mase_scales(np.array([[0.0, 1.0, 2.0, 3.0, 4.0]]), np.array([[5.0]]), 1).tolist()
    [1.0]
    >>> mask = np.array([[True, True, False, False, False]])
    >>> mase_scales(np.array([[0.0, 0.0, 2.0, 4.0, 6.0]]), np.array([[8.0]]), 1, mask).tolist()
    [2.0]

    """
    insample, y = _as_rows(np.asarray(insample, dtype=np.float64)), _as_rows(np.asarray(y, dtype=np.float64))
    if insample_mask is None:
        insample_mask = np.zeros(insample.shape, dtype=bool)
    insample_mask = _as_rows(np.asarray(insample_mask, dtype=bool))
    full = np.concatenate([insample, y], axis=1)
    valid = np.concatenate([~insample_mask, np.ones(y.shape, dtype=bool)], axis=1)
    # a seasonal difference counts only if both of its ends are real values
    diff_valid = valid[:, m:] & valid[:, :-m]
    diffs = np.where(diff_valid, np.abs(full[:, m:] - full[:, :-m]), 0.0)
    counts = diff_valid.sum(axis=1)
    return np.where(counts > 0, diffs.sum(axis=1) / np.maximum(counts, 1), 0.0)


def loss_grad(
    metric: Union[str, Metric],
    y: np.ndarray,
    y_hat: Operand,
    tape: GradientTape,
    insample: Optional[np.ndarray] = None,
    m: int = 1,
    insample_mask: Optional[np.ndarray] = None,
    on_flat: str = "error",
    eps: float = EPS
) -> Node:
    """

    Records a training loss on the tape and returns the scalar loss node.
    Inputs are a single horizon [H] or a batch [B x H]; the loss is the mean
    of the per-series metric over the batch. Guarded terms contribute 0 and
    have zero gradient.

    >>> tape = GradientTape()
    >>> y_hat = tape.watch("y_hat", np.array([50.0]))
    >>> loss = loss_grad("smape", np.array([100.0]), y_hat, tape)
    >>> round(float(loss.value), 6)
    66.666667

    :param metric: smape, mape or mase
    :param y: target values
    :param y_hat: forecast, usually a node on the tape
    :param tape: tape to record on
    :param insample: history windows for the MASE scale
    :param m: seasonality for MASE
    :param insample_mask: left padding mask of the history windows
    :param on_flat: error raises on a flat seasonal history, mask gives such rows weight 0
    :param eps: denominator guard
    :return: scalar loss node
    """
    metric = Metric.parse(metric)
    y = np.asarray(y, dtype=np.float64)
    y_hat_value = value_of(y_hat)
    if y.shape != y_hat_value.shape:
        raise ValueError(f"target of shape {y.shape} does not match forecast of shape {y_hat_value.shape}")
    if metric not in TRAINING_LOSSES:
        raise ValueError(f"{metric.value} is not a training loss, must be one of {[m.value for m in TRAINING_LOSSES]}")

    abs_err = tape.abs(tape.sub(y_hat, y))
    if metric == Metric.SMAPE:
        ratio = tape.safe_div(abs_err, tape.add(tape.abs(y_hat), np.abs(y)), eps)
        return tape.scale(tape.mean(ratio), 200.0)
    elif metric == Metric.MAPE:
        ratio = tape.safe_div(abs_err, np.abs(y), eps)
        return tape.scale(tape.mean(ratio), 100.0)

    if insample is None:
        raise ValueError("MASE needs the history windows")
    if on_flat not in {"error", "mask"}:
        raise ValueError(f"unknown flat history handling {on_flat}, must be error or mask")
    scales = mase_scales(insample, y, m, insample_mask)
    flat = scales < eps
    if np.any(flat) and on_flat == "error":
        raise ValueError(f"flat seasonal history in {int(flat.sum())} of {len(scales)} windows, MASE is undefined")
    weights = np.where(flat, 0.0, 1.0 / np.where(flat, 1.0, scales))
    num_valid = int((~flat).sum())
    horizon = y.shape[-1]
    if y.ndim == 1:
        weights = weights[0]
    else:
        weights = weights[:, None]
    total = tape.sum(tape.scale(abs_err, weights))
    return tape.scale(total, 0.0 if num_valid == 0 else 1.0 / (num_valid * horizon))


class Loss:
    def __init__(self, metric: Union[str, Metric], on_flat: str = "mask", eps: float = EPS):
        self.metric = Metric.parse(metric)
        self.on_flat = on_flat
        self.eps = eps

    def __call__(
        self,
        y: np.ndarray,
        y_hat: Operand,
        tape: GradientTape,
        insample: Optional[np.ndarray] = None,
        m: int = 1,
        insample_mask: Optional[np.ndarray] = None
    ) -> Node:
        return loss_grad(self.metric, y, y_hat, tape, insample, m, insample_mask, self.on_flat, self.eps)

    def __repr__(self) -> str:
        return f"Loss({self.metric.value})"


def loss_from_config(cfg: Union[str, Dict[str, Any]]) -> Loss:
    if isinstance(cfg, str):
        cfg = {"type": cfg}
    cfg = copy.deepcopy(cfg)
    loss_type = cfg.pop("type")
    if Metric.parse(loss_type) in TRAINING_LOSSES:
        return Loss(loss_type, **cfg)
    else:
        raise ValueError(f"unknown loss type {loss_type}")
