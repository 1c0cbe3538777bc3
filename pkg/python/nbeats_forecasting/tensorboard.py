import logging
from typing import Any, List, Optional, Union

from typing_extensions import override


def summary_writer(log_dir: str) -> Any:
    # imported on first use, torch is slow to import
    from torch.utils.tensorboard import SummaryWriter
    return SummaryWriter(log_dir=log_dir)


class TensorboardLogger:
    def log_tensorboard(self, writer: Any, step: int):
        raise NotImplementedError

    def log_info(self, logger: logging.Logger, step: int):
        raise NotImplementedError


class AverageTracker(TensorboardLogger):
    """

    Running mean of a scalar between two log steps.

    >>> tracker = AverageTracker("train_loss")
    >>> tracker.add(1.0); tracker.add(2.0)
    >>> tracker.value
    1.5

    """

    def __init__(self, name: str, fmt: str = ".2f"):
        self.name = name
        self.values: List[float] = []
        self.fmt = fmt

    def add(self, v: Union[float, int]):
        self.values.append(float(v))

    @property
    def value(self) -> float:
        return sum(self.values) / max(len(self.values), 1)

    @override
    def log_tensorboard(self, writer: Optional[Any], step: int):
        if writer is None:
            return
        writer.add_scalar(self.name, self.value, step)

    @override
    def log_info(self, logger: logging.Logger, step: int):
        logger.info(f"[step {step}] {self.name} = {self.value:{self.fmt}}")

    def reset(self):
        self.values.clear()
