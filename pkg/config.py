"""
Environment and run-configuration loading.
"""
import hashlib
import json
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv
from pydantic import ValidationError

from errors import ConfigError
from models import RunConfig

# Load environment variables from .env file
load_dotenv()

CONFIG_ENV = "FLEXREGION_CONFIG"
LOG_LEVEL_ENV = "FLEXREGION_LOG_LEVEL"
OUT_ENV = "FLEXREGION_OUT"

DEFAULT_LOG_LEVEL = "INFO"


def get_log_level() -> str:
    return os.getenv(LOG_LEVEL_ENV, DEFAULT_LOG_LEVEL).upper()


def read_config_file(path: str) -> dict:
    """
    Reads a TOML or JSON configuration file into a plain dictionary.

    Args:
        path: Path to a ``.toml`` or ``.json`` file

    Returns:
        Parsed configuration mapping

    Raises:
        ConfigError: If the file is missing or cannot be parsed
    """
    file = Path(path)
    if not file.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        if file.suffix.lower() == ".json":
            return json.loads(file.read_text(encoding="utf-8"))
        with file.open("rb") as handle:
            return tomllib.load(handle)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"cannot parse config {path}: {str(e)}")


def load_run_config(
    path: Optional[str] = None,
    seed: Optional[int] = None,
    out_dir: Optional[str] = None,
) -> RunConfig:
    """
    Builds the RunConfig from a file, the environment and CLI overrides.

    Precedence, highest first: explicit arguments, environment variables,
    config file, model defaults.

    Args:
        path: Config file path; falls back to ``FLEXREGION_CONFIG``
        seed: Override for ``seed``
        out_dir: Override for ``paths.out_dir``; falls back to ``FLEXREGION_OUT``

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: If the file is unreadable or a value fails validation
    """
    path = path or os.getenv(CONFIG_ENV)
    raw = read_config_file(path) if path else {}

    out_dir = out_dir or os.getenv(OUT_ENV)
    if out_dir:
        raw.setdefault("paths", {})["out_dir"] = out_dir
    if seed is not None:
        raw["seed"] = seed

    try:
        config = RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {str(e)}")

    wind_csv = config.paths.wind_csv
    if wind_csv and not Path(wind_csv).is_file():
        raise ConfigError(f"wind scenario file not found: {wind_csv}")
    return config


def config_hash(config: RunConfig) -> str:
    """SHA-256 of the canonical JSON form of ``config``."""
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
