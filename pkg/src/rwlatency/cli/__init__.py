"""Command line interface."""

from rwlatency.cli.config import ConfigError, RunConfig, load_config, parse_config
from rwlatency.cli.main import build_parser, main

__all__ = ["ConfigError", "RunConfig", "build_parser", "load_config", "main", "parse_config"]
