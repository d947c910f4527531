"""
Application configuration module.

Defaults live in a Python dictionary; a TOML file and command-line overrides
are merged on top (flags win) and the result is validated into a
PipelineConfig.
"""

import copy
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Union

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - Python 3.10 backport with the same API
    import tomli as tomllib

from dotenv import load_dotenv
from pydantic import ValidationError

from .models import PipelineConfig

# Initialize logger for this module
logger = logging.getLogger("app_config")

APP_CONFIG = {
    "presets": ["5x"],
    "expand_kind": "source_text",
    "max_turns": 6,
    "parallelism": 4,
    "seed": 0,
    "tokenizer": "char4",
    "force_extract": False,
    "paths": {
        "input": None,
        "output_dir": "out",
    },
    "render": {
        "metrics": "font",
        "font_path": "DejaVuSans.ttf",
        "advance_ratio": 0.42,
        "encoder_profile": "default",
        "zoom_scale": 3.0,
        "min_pixels": 1,
        "max_pixels": 4_194_304,
    },
    "corpus": {
        "distractor_min": 3000,
        "distractor_max": 32000,
        "sft_fraction": 0.8,
        "distractor_pool": None,
    },
    "kv": {
        "layers": 8,
        "kv_heads": 4,
        "head_dim": 256,
        "dtype_bytes": 2,
    },
    "endpoints": {},
}


class ConfigError(Exception):
    """Raised when configuration cannot be read or fails validation."""
    pass


def get_config() -> Dict[str, Any]:
    """
    Get a deep copy of the default configuration.

    Returns:
        Configuration dictionary
    """
    logger.debug("Retrieving default configuration")
    return copy.deepcopy(APP_CONFIG)


def _deep_merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_merge(base[key], value)
        else:
            base[key] = value
    return base


def apply_override(config: Dict[str, Any], dotted_key: str, value: Any) -> None:
    """
    Set a nested value from a dotted key such as ``render.metrics``.

    Args:
        config: Configuration dictionary, modified in place
        dotted_key: Path of keys separated by dots
        value: New value; None leaves the key untouched
    """
    if value is None:
        return
    node = config
    parts = dotted_key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value
    logger.debug(f"Override applied: {dotted_key}={value!r}")


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Read a TOML configuration file.

    Raises:
        ConfigError: If the file is missing or is not valid TOML
    """
    path = Path(path)
    try:
        with path.open("rb") as handle:
            data = tomllib.load(handle)
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}")
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"Invalid TOML in {path}: {e}")
    logger.info(f"Loaded config file {path} ({len(data)} top-level keys)")
    return data


def load_config(path: Optional[Union[str, Path]] = None,
                overrides: Optional[Dict[str, Any]] = None) -> PipelineConfig:
    """
    Build the effective pipeline configuration.

    Args:
        path: Optional TOML file merged over the defaults
        overrides: Dotted-key overrides from command-line flags (applied last)

    Returns:
        Validated PipelineConfig

    Raises:
        ConfigError: On unreadable files or invalid values
    """
    merged = get_config()
    if path:
        _deep_merge(merged, read_config_file(path))
    for key, value in (overrides or {}).items():
        apply_override(merged, key, value)

    try:
        config = PipelineConfig.model_validate(merged)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}")

    logger.debug(f"Effective configuration: presets={config.presets}, expand_kind={config.expand_kind}, "
                 f"max_turns={config.max_turns}, parallelism={config.parallelism}, seed={config.seed}")
    return config


def resolve_secret(env_name: Optional[str]) -> Optional[str]:
    """
    Read an endpoint secret from the environment (``.env`` files included).

    Args:
        env_name: Name of the environment variable, or None

    Returns:
        The secret value, or None when no variable is configured or set
    """
    if not env_name:
        return None
    load_dotenv()
    value = os.environ.get(env_name)
    if value is None:
        logger.warning(f"Environment variable {env_name} is not set")
    return value
