"""Configuration, initial data, run orchestration and the command line."""
from .config import (ConfigError, RunConfig, config_from_dict, dump_config, load_config,
                     parse_config, synthesize_initial_data)
from .simulate import RunResult, integrate, load_checkpoint_state, resume, run
from .cli import main

__all__ = [
    "ConfigError", "RunConfig", "config_from_dict", "dump_config", "load_config",
    "parse_config", "synthesize_initial_data", "RunResult", "integrate",
    "load_checkpoint_state", "resume", "run", "main",
]
