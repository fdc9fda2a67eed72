"""Configuration management."""
import copy
import logging
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from ..errors import ConfigurationError

logger = logging.getLogger(__name__)

DEFAULT_RUNTIME: Dict[str, Any] = {
    "output": {"dir": "out", "plot": True},
    "performance": {"threads": 1, "progress": True},
    "capacity": {"gap_tol": 1e-9, "max_iter": 100_000},
    "logging": {"level": "INFO", "file": None},
}

SEARCH_PATHS = (
    Path("configs/default.yaml"),
    Path(__file__).resolve().parents[3] / "configs" / "default.yaml",
)


class Config:
    """Runtime settings for sheetslice: output, threads, capacity solver, logging.

    Experiment options are not kept here; they travel in ``ExperimentConfig``
    and enter its hash. Nothing in this object changes report contents except
    the capacity solver tolerances.
    """

    def __init__(self, config_path: Optional[str | Path] = None):
        """Load the runtime YAML over the built-in defaults.

        Args:
            config_path: YAML file. If None, the first existing entry of
                ``SEARCH_PATHS`` is used, else the defaults alone.
        """
        if config_path is None:
            config_path = next((p for p in SEARCH_PATHS if p.exists()), None)

        self.source = Path(config_path) if config_path is not None else None
        self.config = _deep_merge(copy.deepcopy(DEFAULT_RUNTIME), self._read(self.source))

    @staticmethod
    def _read(path: Optional[Path]) -> Dict[str, Any]:
        if path is None:
            logger.debug("No runtime config found, using defaults")
            return {}
        logger.debug(f"Loading runtime config from: {path}")
        with open(path, 'r', encoding='utf-8') as f:
            loaded = yaml.safe_load(f) or {}
        if not isinstance(loaded, dict):
            raise ConfigurationError(f"{path}: top level must be a mapping")
        return loaded

    def get(self, key: str, default: Any = None) -> Any:
        """Look up a dotted key such as ``'capacity.gap_tol'``; ``default`` if absent."""
        value: Any = self.config
        for part in key.split('.'):
            if not isinstance(value, dict) or part not in value:
                return default
            value = value[part]
        return value


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_experiment_file(path: str | Path) -> Dict[str, Any]:
    """Read a flat key-value experiment file.

    Args:
        path: YAML file whose top level maps option names to scalars or lists

    Returns:
        Mapping of option name to value, keys normalized to snake_case
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")

    try:
        with open(path, 'r', encoding='utf-8') as f:
            loaded = yaml.safe_load(f) or {}
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: unreadable config ({exc})") from exc

    if not isinstance(loaded, dict):
        raise ConfigurationError(f"{path}: experiment file must be a flat mapping")

    flat: Dict[str, Any] = {}
    for key, value in loaded.items():
        if isinstance(value, dict):
            raise ConfigurationError(f"{path}: nested section '{key}' not allowed")
        flat[str(key).replace('-', '_')] = value
    return flat


# Global config instance
_config_instance: Optional[Config] = None


def get_config(config_path: Optional[str | Path] = None) -> Config:
    """Get global configuration instance.

    Args:
        config_path: Path to config file (only used on first call)

    Returns:
        Config instance
    """
    global _config_instance
    if _config_instance is None:
        _config_instance = Config(config_path)
    return _config_instance
