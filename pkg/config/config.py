"""Application configuration module."""

import json
import os
from pathlib import Path
from typing import Any

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Base paths
PROJECT_ROOT = Path(__file__).parent.parent
CONFIG_DIR = PROJECT_ROOT / "config"
BACKEND_DIR = PROJECT_ROOT / "backend"
EXPERIMENTS_DIR = CONFIG_DIR / "experiments"

# Output directories
RESULTS_DIR = Path(os.getenv("RESULTS_DIR", str(PROJECT_ROOT / "results")))
LOGS_DIR = BACKEND_DIR / "logs"

# Logging configuration
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_FILE_PATH = os.getenv("LOG_FILE_PATH", str(LOGS_DIR / "lab.log"))

HYPERPARAMETERS_FILE = "hyperparameters.json"

CLASSIC_CONTROL = "classic_control"
MINATAR = "minatar"

# Environment name -> default table
ENV_DOMAINS = {
    "cartpole": CLASSIC_CONTROL,
    "acrobot": CLASSIC_CONTROL,
    "mountaincar": CLASSIC_CONTROL,
    "min_breakout": MINATAR,
}


def load_json_config(filename: str) -> dict[str, Any]:
    """Load JSON configuration file.

    Args:
        filename: Name of the JSON file (with .json extension)

    Returns:
        Dictionary containing configuration data

    Raises:
        FileNotFoundError: If config file doesn't exist
        json.JSONDecodeError: If JSON is invalid
    """
    config_path = CONFIG_DIR / filename

    if not config_path.exists():
        raise FileNotFoundError(f"Configuration file not found: {config_path}")

    with open(config_path, encoding="utf-8") as f:
        return json.load(f)


def get_hyperparameter_tables() -> dict[str, Any]:
    """Get the per-domain hyperparameter default tables."""
    return load_json_config(HYPERPARAMETERS_FILE)


def get_domain_for_env(env_name: str) -> str:
    """Return the default-table domain an environment belongs to.

    Raises:
        ValueError: If the environment is unknown
    """
    try:
        return ENV_DOMAINS[env_name]
    except KeyError:
        raise ValueError(
            f"Unknown environment '{env_name}'. "
            f"Expected one of: {', '.join(sorted(ENV_DOMAINS))}"
        ) from None


def get_preset_defaults(env_name: str, preset: str) -> dict[str, Any]:
    """Get the agent defaults for one table column.

    Args:
        env_name: Environment name, selects the classic or MinAtar table
        preset: Agent column (dqn, rainbow, qr_dqn, iqn, m_dqn, m_iqn)

    Returns:
        Flat dictionary of agent keys with the table's values

    Raises:
        ValueError: If the preset is unknown
    """
    tables = get_hyperparameter_tables()
    domain_table = tables[get_domain_for_env(env_name)]
    shared = dict(domain_table.get("shared", {}))
    presets = domain_table.get("presets", {})
    if preset not in presets:
        raise ValueError(
            f"Unknown agent preset '{preset}'. "
            f"Expected one of: {', '.join(sorted(presets))}"
        )
    shared.update(presets[preset])
    return shared


def get_run_defaults(env_name: str) -> dict[str, Any]:
    """Get the [run] section defaults for an environment's domain."""
    tables = get_hyperparameter_tables()
    return dict(tables[get_domain_for_env(env_name)].get("run", {}))


def ensure_directories() -> None:
    """Ensure required directories exist."""
    directories = [
        RESULTS_DIR,
        LOGS_DIR,
    ]

    for directory in directories:
        directory.mkdir(parents=True, exist_ok=True)


# Configuration constants
DEFAULT_CONFIG = {
    "max_workers": 1,
    "final_window": 3,
    "ci_level": 0.95,
}


class Config:
    """Configuration class for easy access to settings."""

    def __init__(self) -> None:
        """Initialize configuration."""
        self.log_level = LOG_LEVEL
        self.log_file_path = LOG_FILE_PATH
        self.results_dir = RESULTS_DIR

        self.max_workers = int(
            os.getenv("MAX_WORKERS", DEFAULT_CONFIG["max_workers"])
        )
        self.final_window = int(
            os.getenv("FINAL_WINDOW", DEFAULT_CONFIG["final_window"])
        )
        self.ci_level = float(os.getenv("CI_LEVEL", DEFAULT_CONFIG["ci_level"]))

        # Load JSON configurations
        try:
            self.hyperparameters = get_hyperparameter_tables()
        except (FileNotFoundError, json.JSONDecodeError) as e:
            print(f"Warning: Could not load configuration: {e}")
            self.hyperparameters = {}

    @property
    def known_presets(self) -> list[str]:
        """Agent presets available in the classic-control table."""
        return sorted(
            self.hyperparameters.get(CLASSIC_CONTROL, {}).get("presets", {})
        )


# Global configuration instance
config = Config()
