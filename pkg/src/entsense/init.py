"""Initialization module for entsense."""

from pathlib import Path

import yaml

from .config import DEFAULT_CONFIG, default_config_dir


def ensure_config_dir() -> Path:
    """Create configuration directory if it doesn't exist."""
    config_dir = default_config_dir()
    config_dir.mkdir(parents=True, exist_ok=True)
    return config_dir


def create_default_config(config_dir: Path) -> Path:
    """Create default configuration file if it doesn't exist."""
    config_file = config_dir / 'config.yaml'
    if not config_file.exists():
        with open(config_file, 'w', encoding='utf-8') as f:
            yaml.safe_dump(DEFAULT_CONFIG, f, sort_keys=True, default_flow_style=False)
    return config_file


def initialize_entsense() -> Path:
    """Initialize the entsense configuration directory and return the config file."""
    config_dir = ensure_config_dir()
    return create_default_config(config_dir)
