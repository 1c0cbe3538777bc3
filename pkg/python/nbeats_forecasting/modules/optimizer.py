import copy
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Tuple

import numpy as np


@dataclass(frozen=True)
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    state: AdamState
) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """

    One Adam update with bias correction. Returns new parameter arrays and
    a new state, the inputs are left untouched.

    >>> params, state = adam_step({"w": np.array([1.0])}, {"w": np.array([1.0])}, AdamState())
    >>> round(float(params["w"][0]), 6), state.step
    (0.999, 1)

    :param params: parameters by name
    :param grads: gradients by name, one for every parameter
    :param state: optimizer state
    :return: updated parameters and optimizer state
    """
    if set(params) != set(grads):
        raise ValueError(
            f"parameters and gradients do not match, missing gradients for "
            f"{sorted(set(params) - set(grads))}, unknown gradients for {sorted(set(grads) - set(params))}"
        )
    step = state.step + 1
    new_params, new_m, new_v = {}, {}, {}
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.shape:
            raise ValueError(f"gradient of {name} has shape {g.shape}, expected {p.shape}")
        if not np.all(np.isfinite(g)):
            raise RuntimeError(f"got non-finite gradient for parameter {name} at step {step}")
        m = state.m.get(name, np.zeros_like(p))
        v = state.v.get(name, np.zeros_like(p))
        m = state.beta1 * m + (1 - state.beta1) * g
        v = state.beta2 * v + (1 - state.beta2) * np.square(g)
        if state.lr == 0:
            new_params[name] = p
        else:
            m_hat = m / (1 - state.beta1 ** step)
            v_hat = v / (1 - state.beta2 ** step)
            new_params[name] = p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new_m[name] = m
        new_v[name] = v
    return new_params, replace(state, step=step, m=new_m, v=new_v)


def optimizer_from_config(cfg: Dict[str, Any]) -> AdamState:
    cfg = copy.deepcopy(cfg)
    opt_type = cfg.pop("type", "adam")
    if opt_type == "adam":
        betas = cfg.pop("betas", (0.9, 0.999))
        return AdamState(beta1=float(betas[0]), beta2=float(betas[1]), **cfg)
    else:
        raise ValueError(f"unknown optimizer type {opt_type}")
