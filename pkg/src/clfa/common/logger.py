import os
import json
import logging

from clfa.common import names as N


Logger = logging.getLogger("clfa")

_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def setup_logging(level: str | int | None = None) -> logging.Logger:
    """Configure the package logger once. The level falls back to CLFA_LOG_LEVEL, then INFO."""
    if level is None:
        level = os.environ.get(N.ENV_LOG_LEVEL, "INFO")
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.INFO
    if not Logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(_FORMAT))
        Logger.addHandler(handler)
        Logger.propagate = False
    Logger.setLevel(level)
    return Logger


def fmsg(message: str, **fields) -> str:
    """Render a message followed by sorted key=value pairs."""
    if not fields:
        return message
    def render(value):
        if isinstance(value, float):
            return f"{value:.6g}"
        if isinstance(value, (dict, list, tuple)):
            return json.dumps(value, default=str)
        return str(value)
    pairs = " ".join(f"{k}={render(v)}" for k, v in sorted(fields.items()))
    return f"{message} | {pairs}"
