import logging

_LOG_FORMAT = "%(asctime)s [%(name)s] [%(levelname)s] %(message)s"

_LEVELS = {
    "debug": logging.DEBUG,
    "info": logging.INFO,
    "warning": logging.WARNING,
    "error": logging.ERROR
}

__all__ = [
    "setup_logging",
    "log_level",
    "add_file_log",
    "get_logger",
    "eta_minutes_message"
]


def log_level(name: str) -> int:
    """

    Maps a log level name to a logging level, "none" disables logging.

    >>> log_level("debug") == logging.DEBUG
    True

    """
    name = name.lower()
    if name == "none":
        return logging.CRITICAL + 1
    if name not in _LEVELS:
        raise ValueError(f"unknown log level {name}, must be one of {['none'] + sorted(_LEVELS)}")
    return _LEVELS[name]


def setup_logging(level: int = logging.INFO) -> None:
    """

    Sets up logging with the package log format and level. Levels above
    CRITICAL disable logging entirely, including the package loggers.

    :param level: log level
    :return: None
    """
    logging.basicConfig(format=_LOG_FORMAT)
    logging.getLogger().setLevel(level)
    if level > logging.CRITICAL:
        logging.disable(logging.CRITICAL)
    else:
        logging.disable(logging.NOTSET)
    _default["level"] = level


_default = {"level": logging.INFO}


def add_file_log(logger: logging.Logger, log_file: str) -> logging.Handler:
    """

    Add file logging to an existing logger

    :param logger: logger
    :param log_file: path to logfile
    :return: the added handler, remove it from the logger when done
    """
    file_handler = logging.FileHandler(log_file, encoding="utf8")
    file_handler.setFormatter(logging.Formatter(_LOG_FORMAT))
    logger.addHandler(file_handler)
    return file_handler


def get_logger(name: str, level: int = None) -> logging.Logger:
    """

    Get a logger that writes to stderr. Without an explicit level the level
    from the last setup_logging call is used.

    :param name: name of the logger
    :param level: log level
    :return: logger
    """

    logger = logging.getLogger(name)
    logger.propagate = False
    if not any(isinstance(h, logging.StreamHandler) and not isinstance(h, logging.FileHandler)
               for h in logger.handlers):
        stderr_handler = logging.StreamHandler()
        stderr_handler.setFormatter(logging.Formatter(_LOG_FORMAT))
        logger.addHandler(stderr_handler)
    logger.setLevel(_default["level"] if level is None else level)
    return logger


def eta(dur: float, num_iter: int, total_iter: int) -> float:
    """

    Calculate remaining time to reach total_iter iterations.

    :param dur: time spent for num_iter iterations
    :param num_iter: number of iterations so far
    :param total_iter: number of total iterations
    :return: time remaining

    >>> eta(10, 2, 10)
    40.0

    """
    return (dur / max(num_iter, 1)) * total_iter - dur


def eta_minutes_message(num_minutes: float, num_iter: int, total_iter: int) -> str:
    eta_minutes = eta(num_minutes, num_iter, total_iter)
    return f"{num_minutes:.2f} minutes since start, {eta_minutes:.2f} minutes to go"
