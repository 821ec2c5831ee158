"""Experiment file loading and the preset < file < override merge."""

import difflib
import tomllib
from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, ValidationError

from backend.app.models.experiment import AgentConfig, EnvSection, ExperimentConfig, RunSection
from backend.app.utils.errors import ConfigError
from backend.app.utils.logger import get_logger
from config.config import get_preset_defaults, get_run_defaults

logger = get_logger(__name__)

SECTIONS: dict[str, type[BaseModel]] = {
    "env": EnvSection,
    "agent": AgentConfig,
    "run": RunSection,
}


def _suggest(key: str, candidates: list[str]) -> str:
    match = difflib.get_close_matches(key, candidates, n=1)
    return f" (did you mean {match[0]})" if match else ""


def check_keys(section: str, keys: list[str]) -> None:
    """Reject keys that are not fields of ``section``.

    Raises:
        ConfigError: Naming the first unknown key with a close-match suggestion
    """
    if section not in SECTIONS:
        raise ConfigError(f"unknown section '{section}'{_suggest(section, list(SECTIONS))}")
    fields = list(SECTIONS[section].model_fields)
    for key in keys:
        if key not in fields:
            raise ConfigError(f"unknown key '{section}.{key}'{_suggest(key, fields)}")


def load_experiment_file(path: str | Path) -> dict[str, dict[str, Any]]:
    """Parse a TOML experiment file.

    Raises:
        ConfigError: If the file is missing, unparsable or has unknown keys
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as f:
            raw = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e
    for section, values in raw.items():
        if not isinstance(values, dict):
            raise ConfigError(f"'{section}' must be a table, e.g. [{section}]")
        check_keys(section, list(values))
    return raw


def parse_override_value(text: str) -> Any:
    """Interpret a command-line value with TOML literal rules; bare words stay strings."""
    try:
        return tomllib.loads(f"value = {text}")["value"]
    except tomllib.TOMLDecodeError:
        return text


def parse_overrides(pairs: dict[str, str]) -> dict[str, dict[str, Any]]:
    """Split ``section.key`` overrides into nested sections.

    Raises:
        ConfigError: On a malformed or unknown key
    """
    nested: dict[str, dict[str, Any]] = {}
    for dotted, text in pairs.items():
        section, _, key = dotted.partition(".")
        if not key:
            raise ConfigError(f"override '{dotted}' must look like section.key")
        check_keys(section, [key])
        nested.setdefault(section, {})[key] = parse_override_value(text)
    return nested


def _first_error(e: ValidationError) -> str:
    error = e.errors()[0]
    location = ".".join(str(part) for part in error["loc"])
    return f"{location}: {error['msg']}" if location else error["msg"]


def build_experiment(
    raw: dict[str, dict[str, Any]],
    overrides: Optional[dict[str, str]] = None,
) -> ExperimentConfig:
    """Merge table defaults, file values and overrides into a validated config.

    The env name (from overrides or file) picks the default table and
    ``agent.preset`` the column within it.

    Raises:
        ConfigError: On unknown keys, invalid values or a missing env name
    """
    layered = parse_overrides(overrides or {})
    for section, values in raw.items():
        check_keys(section, list(values))

    def merged(section: str) -> dict[str, Any]:
        return {**raw.get(section, {}), **layered.get(section, {})}

    env_values = merged("env")
    if "name" not in env_values:
        raise ConfigError("missing env.name (set [env] name = ... or --env.name)")
    env_name = env_values["name"]
    agent_values = merged("agent")
    preset = agent_values.get("preset", "dqn")
    try:
        agent_defaults = get_preset_defaults(env_name, preset)
        run_defaults = get_run_defaults(env_name)
    except ValueError as e:
        raise ConfigError(str(e)) from e

    try:
        return ExperimentConfig(
            env=EnvSection(**env_values),
            agent=AgentConfig(**{**agent_defaults, "preset": preset, **agent_values}),
            run=RunSection(**{**run_defaults, **merged("run")}),
        )
    except ValidationError as e:
        raise ConfigError(_first_error(e)) from e


def experiment_from_preset(
    env_name: str,
    preset: str,
    agent_overrides: Optional[dict[str, Any]] = None,
    run_overrides: Optional[dict[str, Any]] = None,
) -> ExperimentConfig:
    """Config for one table column with optional field changes."""
    raw = {
        "env": {"name": env_name},
        "agent": {"preset": preset, **(agent_overrides or {})},
        "run": dict(run_overrides or {}),
    }
    return build_experiment(raw)


def load_experiment(path: str | Path, overrides: Optional[dict[str, str]] = None) -> ExperimentConfig:
    """Load, merge and validate an experiment file."""
    cfg = build_experiment(load_experiment_file(path), overrides)
    logger.debug(f"Loaded experiment {path} ({cfg.env.name}/{cfg.label})")
    return cfg


def effective_config_lines(cfg: ExperimentConfig) -> list[str]:
    """Canonical sorted ``section.key=value`` lines."""
    return [f"{key}={value}" for key, value in cfg.flat_items()]
