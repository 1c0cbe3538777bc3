import os
import platform
import re
from typing import Dict, Optional

from tqdm import tqdm

from nbeats_forecasting.configuration import WORKERS_ENV_VAR
from nbeats_forecasting.modules.nbeats import NBeatsModel


def cpu_info() -> str:
    if platform.system() == "Linux":
        try:
            cpu_regex = re.compile(r"model name\t: (.*)", re.DOTALL)
            with open("/proc/cpuinfo", "r", encoding="utf8") as inf:
                for line in inf:
                    match = cpu_regex.match(line.strip())
                    if match is not None:
                        return f"{match.group(1)} ({os.cpu_count()} cores)"
        except OSError:
            pass
    return f"{platform.processor() or 'unknown cpu'} ({os.cpu_count()} cores)"


def num_parameters(model: NBeatsModel) -> Dict[str, int]:
    """

    Get the number of stored and effective parameters of a model. Shared
    weights are stored once but applied in every block.

    >>> from nbeats_forecasting.modules.nbeats import ModelConfig, build_model
    >>> num_parameters(build_model(ModelConfig(horizon=1, block_count=3, layers=1, width=2, share_weights=True), 0))
    {'trainable': 12, 'effective': 36}

    :param model: model
    :return: dict containing number of parameters
    """
    trainable = sum(p.size for p in model.parameters().values())
    per_block = trainable // len(model.blocks)
    return {"trainable": trainable, "effective": per_block * model.block_count}


def default_workers(workers: Optional[int] = None) -> int:
    """

    Worker count from the argument, else from NBF_NUM_WORKERS, else the
    number of cores.

    """
    if workers is None:
        env = os.environ.get(WORKERS_ENV_VAR)
        workers = int(env) if env else (os.cpu_count() or 1)
    if workers < 1:
        raise ValueError(f"number of workers must be at least 1, but got {workers}")
    return workers


def progress_bar(desc: str, total: int, disable: bool = False) -> tqdm:
    return tqdm(
        desc=desc,
        total=total,
        ascii=True,
        leave=False,
        disable=disable
    )
