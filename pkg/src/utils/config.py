import json
import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

from ..models.errors import ConfigurationError

logger = logging.getLogger(__name__)

OUT_DIR_ENV_VAR = "FHE_REGRESS_OUT"
DEFAULT_OUT_DIR = "out"


def load_environment() -> List[str]:
    """Load a .env file if one exists and return notices about the environment."""
    notices = []
    if Path(".env").exists():
        load_dotenv()
    if not os.getenv(OUT_DIR_ENV_VAR):
        notices.append(f"{OUT_DIR_ENV_VAR} not set; reports go to --out-dir or ./{DEFAULT_OUT_DIR}")
    return notices


def load_config_file(path: Optional[str | Path]) -> Dict[str, Any]:
    """Read TOML or JSON key-values; keys are flag names with '_' for '-'."""
    if path is None:
        return {}
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"Config file not found: {path}")
    try:
        if path.suffix.lower() == ".json":
            settings = json.loads(path.read_text(encoding="utf-8"))
        else:
            settings = tomllib.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        raise ConfigurationError(f"Could not parse config file {path}: {e}")
    if not isinstance(settings, dict):
        raise ConfigurationError(f"Config file {path} must hold key-value pairs")
    settings = {key.replace("-", "_"): value for key, value in settings.items()}
    logger.debug(f"Loaded {len(settings)} settings from {path}")
    return settings


def resolve_setting(flag_value: Any, settings: Dict[str, Any], key: str, default: Any = None) -> Any:
    """Flags win, then the config file, then the default."""
    if flag_value is not None:
        return flag_value
    return settings.get(key, default)


def resolve_out_dir(flag_value: Optional[str], settings: Optional[Dict[str, Any]] = None) -> Path:
    value = resolve_setting(flag_value, settings or {}, "out_dir") or os.getenv(OUT_DIR_ENV_VAR) or DEFAULT_OUT_DIR
    path = Path(value)
    path.mkdir(parents=True, exist_ok=True)
    return path
