"""
Run configuration and logging setup for flatstrata.

Defaults live in code; a JSON (json5) file may override them and the
FLATSTRATA_BUDGET environment variable overrides the node budget.
"""

import logging
import os
import sys
from dataclasses import dataclass, asdict, fields
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional

import json5
from dotenv import load_dotenv

from flatstrata_errors import ConfigError

BUDGET_ENV_VAR = "FLATSTRATA_BUDGET"
MIN_NODE_BUDGET = 10_000


@dataclass
class RunConfig:
    """Tolerances, budgets and output policy shared by every command."""
    eps_geom: float = 1e-9
    eps_angle: float = 1e-7
    eps_rank: float = 1e-8
    tol_eig_rel: float = 1e-5
    node_budget: int = 2_000_000
    fd_step_factor: float = 1e-3
    richardson: bool = True
    output_format: str = "json"
    seed: int = 1234
    progress: bool = True
    log_dir: str = "logs"
    deformation_samples: int = 50

    def validate(self) -> "RunConfig":
        for name in ("eps_geom", "eps_angle", "eps_rank", "tol_eig_rel", "fd_step_factor"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)!r}")
        if int(self.node_budget) < MIN_NODE_BUDGET:
            raise ConfigError(f"node_budget must be >= {MIN_NODE_BUDGET}, got {self.node_budget}")
        if self.output_format not in ("json", "csv"):
            raise ConfigError(f"output_format must be json or csv, got {self.output_format!r}")
        if self.deformation_samples < 1:
            raise ConfigError("deformation_samples must be >= 1")
        return self

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data).validate()


def create_default_config() -> Dict[str, Any]:
    """Create default configuration."""
    return RunConfig().to_dict()


def load_config(config_path: Optional[str] = None,
                overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Build the effective configuration.

    Args:
        config_path: Optional path to a JSON/json5 file updating the defaults
        overrides: Values from command-line flags (None entries ignored)

    Returns:
        Validated RunConfig
    """
    load_dotenv()
    config = create_default_config()

    if config_path:
        try:
            with open(config_path, 'r', encoding='utf-8') as f:
                user_config = json5.load(f)
        except (OSError, ValueError) as e:
            raise ConfigError(f"could not load config file {config_path}: {e}")
        if not isinstance(user_config, dict):
            raise ConfigError(f"config file {config_path} must hold an object")
        config.update(user_config)

    env_budget = os.environ.get(BUDGET_ENV_VAR)
    if env_budget:
        try:
            config["node_budget"] = int(env_budget)
        except ValueError:
            raise ConfigError(f"{BUDGET_ENV_VAR} must be an integer, got {env_budget!r}")

    for key, value in (overrides or {}).items():
        if value is not None:
            config[key] = value

    return RunConfig.from_dict(config)


def setup_logging(log_dir: Optional[str] = "logs", level: int = logging.INFO) -> logging.Logger:
    """
    Setup logging with a console handler and a detailed file handler.

    The console handler writes to stderr so reports on stdout stay clean.
    Passing log_dir=None skips the file handler.
    """
    logger = logging.getLogger('FlatStrata')
    logger.setLevel(logging.DEBUG)

    # Remove any existing handlers
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(level)
    console_handler.setFormatter(logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    ))
    logger.addHandler(console_handler)

    if log_dir:
        log_path = Path(log_dir)
        log_path.mkdir(parents=True, exist_ok=True)
        timestamp = datetime.now().strftime('%Y%m%d_%H%M%S')
        file_handler = logging.FileHandler(log_path / f'flatstrata_{timestamp}.log', encoding='utf-8')
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - [%(funcName)s:%(lineno)d] - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        ))
        logger.addHandler(file_handler)
        logger.debug(f"Log file: {file_handler.baseFilename}")

    logger.propagate = False
    return logger
