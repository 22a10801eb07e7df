"""
Configuration parsing and command implementations for the command line
"""

from milkit.cli.config_file import CLIConfig, apply_overrides, load_config, parse_config, parse_overrides
from milkit.cli.commands import cmd_benchmark, cmd_datagen, cmd_eval, cmd_inspect, cmd_train

__all__ = [
    "CLIConfig",
    "apply_overrides",
    "load_config",
    "parse_config",
    "parse_overrides",
    "cmd_benchmark",
    "cmd_datagen",
    "cmd_eval",
    "cmd_inspect",
    "cmd_train",
]
