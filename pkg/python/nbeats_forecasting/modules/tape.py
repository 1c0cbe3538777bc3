import collections
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

__all__ = [
    "Node",
    "GradientTape",
    "EagerOps",
    "EAGER",
    "Operand",
    "value_of",
    "backward",
    "GradientCheckResult",
    "gradient_check"
]


class Node:
    """

    A value recorded on a gradient tape. Leaves are created with
    GradientTape.watch, all other nodes are outputs of recorded operations.

    """
    __slots__ = ("value", "index", "name")

    def __init__(self, value: np.ndarray, index: int, name: Optional[str] = None):
        self.value = value
        self.index = index
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Node(index={self.index}, name={self.name}, shape={self.value.shape})"


Operand = Union[Node, np.ndarray, float]
# maps the gradient of an op output to the gradients of its inputs
BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


def value_of(x: Operand) -> np.ndarray:
    if isinstance(x, Node):
        return x.value
    return np.asarray(x, dtype=np.float64)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    # sum out the axes numpy broadcasting added or stretched
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


@dataclass
class _Op:
    kind: str
    output: int
    inputs: Tuple[Optional[int], ...]
    backward: BackwardFn
    # activation / sign / guard pattern, used to detect kinks during gradient checks
    pattern: Optional[np.ndarray] = None


class EagerOps:
    """

    The primitive operations without recording anything. Shares its
    interface with GradientTape so forward code runs with either.

    """

    def watch(self, name: str, value: np.ndarray) -> np.ndarray:
        return np.asarray(value, dtype=np.float64)

    def matmul(self, a: Operand, b: Operand, transpose_b: bool = False) -> np.ndarray:
        bv = value_of(b)
        return value_of(a) @ (bv.T if transpose_b else bv)

    def add(self, a: Operand, b: Operand) -> np.ndarray:
        return value_of(a) + value_of(b)

    def sub(self, a: Operand, b: Operand) -> np.ndarray:
        return value_of(a) - value_of(b)

    def relu(self, a: Operand) -> np.ndarray:
        return np.maximum(value_of(a), 0.0)

    def scale(self, a: Operand, c: Union[float, np.ndarray]) -> np.ndarray:
        return value_of(a) * c

    def abs(self, a: Operand) -> np.ndarray:
        return np.abs(value_of(a))

    def safe_div(self, a: Operand, b: Operand, eps: float) -> np.ndarray:
        av, bv = value_of(a), value_of(b)
        valid = bv >= eps
        return np.where(valid, av / np.where(valid, bv, 1.0), 0.0)

    def sum(self, a: Operand, axis: Optional[int] = None) -> np.ndarray:
        return np.sum(value_of(a), axis=axis)

    def mean(self, a: Operand, axis: Optional[int] = None) -> np.ndarray:
        return np.mean(value_of(a), axis=axis)


EAGER = EagerOps()


class GradientTape(EagerOps):
    """

    Ordered record of primitive operations for exact reverse-mode
    differentiation. A tape is owned by exactly one forward/backward pass.

    >>> tape = GradientTape()
    >>> x = tape.watch("x", np.array([3.0]))
    >>> out = tape.relu(tape.add(tape.scale(x, 2.0), 1.0))
    >>> out.value.tolist()
    [7.0]
    >>> backward(tape, output=out)["x"].tolist()
    [2.0]

    """

    def __init__(self) -> None:
        self._nodes: List[Node] = []
        self._ops: List[_Op] = []
        self._leaves: Dict[str, Node] = collections.OrderedDict()

    def __len__(self) -> int:
        return len(self._ops)

    @property
    def leaves(self) -> Dict[str, Node]:
        return dict(self._leaves)

    @property
    def last(self) -> Node:
        if not self._ops:
            raise RuntimeError("tape is empty, run a forward pass before calling backward")
        return self._nodes[self._ops[-1].output]

    def _node(self, value: np.ndarray, name: Optional[str] = None) -> Node:
        node = Node(value, len(self._nodes), name)
        self._nodes.append(node)
        return node

    def _index(self, x: Operand) -> Optional[int]:
        return x.index if isinstance(x, Node) else None

    def _record(
        self,
        kind: str,
        value: np.ndarray,
        inputs: Sequence[Operand],
        backward_fn: BackwardFn,
        pattern: Optional[np.ndarray] = None
    ) -> Node:
        out = self._node(value)
        self._ops.append(_Op(kind, out.index, tuple(self._index(x) for x in inputs), backward_fn, pattern))
        return out

    def watch(self, name: str, value: np.ndarray) -> Node:  # type: ignore[override]
        # watching the same name twice returns the same leaf, so a parameter
        # used several times (shared blocks) accumulates its gradient
        if name in self._leaves:
            return self._leaves[name]
        node = self._node(np.asarray(value, dtype=np.float64), name)
        self._leaves[name] = node
        return node

    def matmul(self, a: Operand, b: Operand, transpose_b: bool = False) -> Node:  # type: ignore[override]
        av, bv = value_of(a), value_of(b)
        rhs = bv.T if transpose_b else bv
        if av.shape[-1] != rhs.shape[0]:
            raise ValueError(f"cannot multiply shapes {av.shape} and {rhs.shape}")

        def _backward(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
            if av.ndim == 1:
                grad_rhs = np.outer(av, g)
            else:
                grad_rhs = av.T @ g
            return g @ rhs.T, grad_rhs.T if transpose_b else grad_rhs

        return self._record("matmul", av @ rhs, (a, b), _backward)

    def add(self, a: Operand, b: Operand) -> Node:  # type: ignore[override]
        av, bv = value_of(a), value_of(b)
        return self._record(
            "add", av + bv, (a, b),
            lambda g: (_unbroadcast(g, av.shape), _unbroadcast(g, bv.shape))
        )

    def sub(self, a: Operand, b: Operand) -> Node:  # type: ignore[override]
        av, bv = value_of(a), value_of(b)
        return self._record(
            "sub", av - bv, (a, b),
            lambda g: (_unbroadcast(g, av.shape), -_unbroadcast(g, bv.shape))
        )

    def relu(self, a: Operand) -> Node:  # type: ignore[override]
        av = value_of(a)
        # subgradient at exactly 0 is 0
        active = av > 0
        return self._record("relu", np.where(active, av, 0.0), (a,), lambda g: (g * active,), active)

    def scale(self, a: Operand, c: Union[float, np.ndarray]) -> Node:  # type: ignore[override]
        av = value_of(a)
        return self._record("scale", av * c, (a,), lambda g: (_unbroadcast(g * c, av.shape),))

    def abs(self, a: Operand) -> Node:  # type: ignore[override]
        av = value_of(a)
        sign = np.sign(av)
        return self._record("abs", np.abs(av), (a,), lambda g: (g * sign,), sign)

    def safe_div(self, a: Operand, b: Operand, eps: float) -> Node:  # type: ignore[override]
        av, bv = value_of(a), value_of(b)
        valid = bv >= eps
        denom = np.where(valid, bv, 1.0)
        out = np.where(valid, av / denom, 0.0)

        def _backward(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
            g = np.where(valid, g, 0.0)
            return (
                _unbroadcast(g / denom, av.shape),
                _unbroadcast(-g * out / denom, bv.shape)
            )

        return self._record("safe_div", out, (a, b), _backward, valid)

    def sum(self, a: Operand, axis: Optional[int] = None) -> Node:  # type: ignore[override]
        av = value_of(a)

        def _backward(g: np.ndarray) -> Tuple[np.ndarray]:
            if axis is not None:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, av.shape).copy(),)

        return self._record("reduce", np.sum(av, axis=axis), (a,), _backward)

    def mean(self, a: Operand, axis: Optional[int] = None) -> Node:  # type: ignore[override]
        av = value_of(a)
        count = av.size if axis is None else av.shape[axis]
        return self.scale(self.sum(a, axis=axis), 1.0 / count)

    def kink_signature(self) -> bytes:
        """

        Concatenated relu / abs / guard patterns of all recorded ops.
        Two evaluations with equal signatures lie on the same smooth piece.

        """
        return b"".join(
            np.ascontiguousarray(op.pattern).tobytes()
            for op in self._ops if op.pattern is not None
        )


def backward(
    tape: GradientTape,
    seed: float = 1.0,
    output: Optional[Node] = None
) -> Dict[str, np.ndarray]:
    """

    Reverse-mode pass over the tape. Every recorded op is visited exactly
    once in reverse order and gradients accumulate additively. The tape
    itself is not modified, so replaying it yields identical gradients.

    :param tape: tape holding a finished forward pass
    :param seed: gradient of the output w.r.t. itself
    :param output: node to differentiate, defaults to the last recorded node
    :return: gradient for every watched leaf, keyed by leaf name
    """
    if len(tape) == 0:
        raise RuntimeError("tape is empty, run a forward pass before calling backward")
    if output is None:
        output = tape.last

    grads: List[Optional[np.ndarray]] = [None] * len(tape._nodes)
    grads[output.index] = np.full_like(output.value, seed, dtype=np.float64)
    for op in reversed(tape._ops):
        g = grads[op.output]
        if g is None:
            continue
        for idx, input_grad in zip(op.inputs, op.backward(g)):
            if idx is None or input_grad is None:
                continue
            if grads[idx] is None:
                grads[idx] = input_grad
            else:
                grads[idx] = grads[idx] + input_grad

    return {
        name: grads[leaf.index] if grads[leaf.index] is not None else np.zeros_like(leaf.value)
        for name, leaf in tape._leaves.items()
    }


@dataclass
class GradientCheckResult:
    max_rel_error: float
    # (parameter name, flat index, analytic, numeric)
    probes: List[Tuple[str, int, float, float]] = field(default_factory=list)
    skipped_kinks: int = 0


def gradient_check(
    build_fn: Callable[[Dict[str, np.ndarray], GradientTape], Node],
    params: Dict[str, np.ndarray],
    rng: np.random.Generator,
    probes: int = 20,
    h: float = 1e-5,
    max_attempts: int = 50
) -> GradientCheckResult:
    """

    Compare reverse-mode gradients against central finite differences on
    randomly chosen scalar parameter entries. A probe whose perturbation
    changes any relu, abs or guard pattern lies at a kink and is redrawn.

    The relative error of a probe is |a - n| / max(|a|, |n|, 1e-3 * max|grad|).

    :param build_fn: builds a scalar output on the given tape from the parameters
    :param params: parameter arrays by name
    :param rng: random generator choosing the probes
    :param probes: number of probes to check
    :param h: finite difference step
    :param max_attempts: redraws allowed per probe before giving up
    :return: check result
    """
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    tape = GradientTape()
    out = build_fn(params, tape)
    base_signature = tape.kink_signature()
    grads = backward(tape, output=out)
    grad_scale = max((float(np.max(np.abs(g))) for g in grads.values() if g.size), default=0.0)
    floor = max(1e-3 * grad_scale, 1e-12)

    def _evaluate(name: str, flat_idx: int, delta: float) -> Tuple[float, bytes]:
        perturbed = dict(params)
        arr = params[name].copy()
        arr.flat[flat_idx] += delta
        perturbed[name] = arr
        probe_tape = GradientTape()
        value = build_fn(perturbed, probe_tape)
        return float(np.sum(value.value)), probe_tape.kink_signature()

    names = sorted(params)
    result = GradientCheckResult(max_rel_error=0.0)
    for _ in range(probes):
        for _ in range(max_attempts):
            name = names[rng.integers(len(names))]
            flat_idx = int(rng.integers(params[name].size))
            f_plus, sig_plus = _evaluate(name, flat_idx, h)
            f_minus, sig_minus = _evaluate(name, flat_idx, -h)
            if sig_plus == base_signature and sig_minus == base_signature:
                break
            result.skipped_kinks += 1
        else:
            raise RuntimeError(f"could not find a probe away from kinks after {max_attempts} attempts")

        numeric = (f_plus - f_minus) / (2 * h)
        analytic = float(grads[name].flat[flat_idx])
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)
        result.probes.append((name, flat_idx, analytic, numeric))
        result.max_rel_error = max(result.max_rel_error, rel)
    return result
