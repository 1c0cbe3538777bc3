import hashlib
import json
import os
import re
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Optional, Tuple

import yaml

WORKERS_ENV_VAR = "NBF_NUM_WORKERS"

_OPERATORS = {
    "file": re.compile(r"file\((.+\.(?:yaml|yml|json))\)"),
    "env": re.compile(r"env\(([A-Z0-9_]+):?(.*?)\)"),
    "abspath": re.compile(r"abspath\((.+)\)"),
    "eval": re.compile(r"eval\((.+)\)")
}
# operators that may appear inside an eval expression
_INLINE = re.compile(r"(env\([A-Z0-9_]+:?.*?\)|eval\(.+\))")


def _resolve_str(s: str, base_dir: str) -> Any:
    matched = [(name, m) for name, regex in _OPERATORS.items() if (m := regex.fullmatch(s)) is not None]
    if len(matched) > 1:
        raise ValueError(f"more than one config operator matches '{s}'")
    elif len(matched) == 0:
        return s

    op, match = matched[0]
    if op == "eval":
        expression = _INLINE.sub(lambda m: str(_resolve_str(m.group(1), base_dir)), match.group(1))
        return eval(expression)

    arg = str(_resolve_str(match.group(1), base_dir))
    if op == "file":
        return load_config(os.path.join(base_dir, arg))
    elif op == "abspath":
        return os.path.abspath(arg)
    default = str(_resolve_str(match.group(2), base_dir))
    if arg in os.environ:
        value = os.environ[arg]
    elif default != "":
        value = default
    else:
        raise ValueError(f"environment variable {arg} not found and no default was given")
    return yaml.load(value, Loader=yaml.FullLoader)


def _resolve(value: Any, base_dir: str) -> Any:
    if isinstance(value, list):
        return [_resolve(v, base_dir) for v in value]
    elif isinstance(value, dict):
        return {k: _resolve(v, base_dir) for k, v in value.items()}
    elif isinstance(value, str):
        return _resolve_str(value, base_dir)
    return value


def load_config(yaml_path: str) -> Any:
    """

    Loads a YAML (or JSON) config and resolves its operators:
        - env(VAR:default) reads an environment variable, the default is optional
        - file(other.yaml) loads another config relative to this one
        - abspath(path) makes a path absolute
        - eval(expression) evaluates a python expression, env() may be used inside
    Operators nest.

    :param yaml_path: path to config file
    :return: resolved configuration

    >>> import os
    >>> _ = os.environ.pop("TEST_NBF_WIDTH", None)
    >>> load_config("resources/test/test_config.yaml") # doctest: +NORMALIZE_WHITESPACE
    {'profile': 'desk',
    'name': 'synthetic-transfer',
    'width': 64,
    'ensemble': {'lookbacks': [2, 3], 'losses': ['smape', 'mase']},
    'iterations': 200}
    """
    if not os.path.isfile(yaml_path):
        raise FileNotFoundError(f"config file {yaml_path} does not exist")
    with open(yaml_path, "r", encoding="utf8") as inf:
        parsed = yaml.load(inf.read(), Loader=yaml.FullLoader)
    return _resolve(parsed, os.path.abspath(os.path.dirname(yaml_path)))


RUN_CONFIG_SCHEMA_VERSION = 1

_FULL_PROFILE: Dict[str, Any] = {
    "block_count": 30,
    "layers": 4,
    "width": 512,
    "share_weights": False,
    "iterations": 15000,
    "batch_size": 1024,
    "lr": 1e-3,
    "history_size": 10,
    "lookbacks": [2, 3, 4, 5, 6, 7],
    "losses": ["smape", "mape", "mase"],
    "repeats": 5
}

PROFILES: Dict[str, Dict[str, Any]] = {
    "full": _FULL_PROFILE,
    "desk": {
        **_FULL_PROFILE,
        "block_count": 8,
        "width": 128,
        "iterations": 2000,
        "lookbacks": [2, 3, 4],
        "losses": ["smape", "mase"],
        "repeats": 3
    }
}


@dataclass(frozen=True)
class RunConfig:
    """

    Full description of an experiment. Values come from the selected
    profile, then from the config file, then from command line flags.

    >>> cfg = run_config({"profile": "desk"})
    >>> cfg.width, cfg.block_count, ensemble_size(cfg)
    (128, 8, 18)

    """
    profile: str
    block_count: int
    layers: int
    width: int
    share_weights: bool
    iterations: int
    batch_size: int
    lr: float
    history_size: int
    lookbacks: Tuple[int, ...]
    losses: Tuple[str, ...]
    repeats: int
    schema_version: int = RUN_CONFIG_SCHEMA_VERSION
    name: str = "nbeats"
    source: Optional[str] = None
    target: Optional[str] = None
    target_dataset: Optional[str] = None
    output_dir: str = "runs"
    seed: int = 0
    log_interval: int = 100
    mode: str = "test"
    metrics: Tuple[str, ...] = ("smape", "mase", "owa")
    baselines: Tuple[str, ...] = ("naive", "seasonal_naive", "naive2", "ses", "theta")
    sweep_block_counts: Tuple[int, ...] = (1, 4, 16)
    sweep_share_weights: Tuple[bool, ...] = (True,)
    sweep_metric: str = "smape"
    bootstrap_resamples: int = 200
    diagnostic_probes: int = 20
    diagnostic_scales: Tuple[float, ...] = (1e-1, 1e-2, 1e-3)
    # parallelism only, excluded from the digest
    workers: Optional[int] = None

    def __post_init__(self):
        if self.schema_version != RUN_CONFIG_SCHEMA_VERSION:
            raise ValueError(
                f"unsupported config schema version {self.schema_version}, expected {RUN_CONFIG_SCHEMA_VERSION}"
            )
        if self.profile not in PROFILES:
            raise ValueError(f"unknown profile {self.profile}, must be one of {sorted(PROFILES)}")
        if self.mode not in {"test", "validation"}:
            raise ValueError(f"unknown split mode {self.mode}, must be test or validation")
        for name in ["lookbacks", "losses", "metrics", "baselines", "sweep_block_counts", "sweep_share_weights",
                     "diagnostic_scales"]:
            value = getattr(self, name)
            if isinstance(value, (str, int, float, bool)):
                value = [value]
            object.__setattr__(self, name, tuple(value))

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


def run_config(raw: Optional[Dict[str, Any]] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """

    Resolves a run config from a profile, a config mapping and overrides.
    Overrides with value None are ignored.

    :param raw: mapping from a config file
    :param overrides: values from command line flags
    :return: resolved run config
    """
    raw = dict(raw or {})
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    profile = overrides.get("profile", raw.get("profile", "desk"))
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile}, must be one of {sorted(PROFILES)}")
    values = {**PROFILES[profile], **raw, **overrides, "profile": profile}
    if values.get("workers") is None and os.environ.get(WORKERS_ENV_VAR):
        values["workers"] = int(os.environ[WORKERS_ENV_VAR])
    unknown = sorted(set(values) - {f.name for f in fields(RunConfig)})
    if unknown:
        raise ValueError(f"unknown config keys {unknown}")
    return RunConfig(**values)


def load_run_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    raw = {}
    if path is not None:
        if not os.path.isfile(path):
            raise FileNotFoundError(f"config file {path} does not exist")
        raw = load_config(path) or {}
        if not isinstance(raw, dict):
            raise ValueError(f"config file {path} must contain a mapping, but got {type(raw).__name__}")
    return run_config(raw, overrides)


def config_digest(cfg: RunConfig) -> str:
    """

    SHA-256 of the canonical JSON of a resolved config.

    >>> config_digest(run_config({"profile": "desk"})) == config_digest(run_config({"profile": "desk", "workers": 8}))
    True

    """
    d = cfg.to_dict()
    d.pop("workers")
    return hashlib.sha256(json.dumps(d, sort_keys=True, separators=(",", ":")).encode("utf8")).hexdigest()


def ensemble_size(cfg: RunConfig) -> int:
    return len(cfg.lookbacks) * len(cfg.losses) * cfg.repeats
