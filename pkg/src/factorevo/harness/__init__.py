"""Run configuration, logging and the command line."""

from .config import ConfigError, RunConfig, load_config
from .runlog import RunLog, read_runlog

__all__ = ["ConfigError", "RunConfig", "load_config", "RunLog", "read_runlog"]
