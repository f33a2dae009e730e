"""
Solver configuration files.

Grammar: UTF-8 text, one `key = value` per line, '#' starts a comment,
list values are comma-separated. Keys are the LratmConfig field names
(`lambda` for the A-penalty weight); missing keys take the defaults.
"""
from pathlib import Path
from typing import Dict, Union
import logging

from pydantic import ValidationError

from src.errors import ConfigError
from src.etl.models import LratmConfig

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

LIST_KEYS = {"ranks", "alpha", "tau", "lambda", "rho"}
FILE_KEY = {"lam": "lambda"}


def _known_keys() -> Dict[str, str]:
    """File key -> field name."""
    keys = {}
    for name in LratmConfig.model_fields:
        keys[FILE_KEY.get(name, name)] = name
    return keys


def _parse_value(key: str, raw: str, path: str, lineno: int):
    if raw.lower() == "none":
        return None
    if key in LIST_KEYS:
        items = [item.strip() for item in raw.split(",")]
        if any(not item for item in items):
            raise ConfigError(f"empty item in list value for '{key}'", path, lineno)
        return items
    return raw


def parse_config(text: str, path: str = "<string>") -> LratmConfig:
    known = _known_keys()
    values: Dict[str, object] = {}
    lines: Dict[str, int] = {}

    for lineno, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError(f"expected 'key = value', got '{content}'", path, lineno)
        key, raw = (part.strip() for part in content.split("=", 1))
        if key not in known:
            raise ConfigError(f"unknown key '{key}'", path, lineno)
        if key in lines:
            raise ConfigError(f"duplicate key '{key}' (first set on line {lines[key]})", path, lineno)
        if not raw:
            raise ConfigError(f"missing value for '{key}'", path, lineno)
        values[key] = _parse_value(key, raw, path, lineno)
        lines[key] = lineno

    try:
        return LratmConfig.model_validate(values)
    except ValidationError as e:
        error = e.errors()[0]
        key = str(error["loc"][0]) if error["loc"] else ""
        key = FILE_KEY.get(key, key)
        raise ConfigError(f"invalid value for '{key}': {error['msg']}", path, lines.get(key)) from e


def read_config(path: PathLike) -> LratmConfig:
    path = str(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise ConfigError(f"not UTF-8 text: {e}", path) from e
    config = parse_config(text, path)
    logger.debug(f"Loaded config from {path}: {config.model_dump()}")
    return config


def _format(value) -> str:
    if isinstance(value, (list, tuple)):
        return ",".join(_format(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    # repr of a float is the shortest string that reads back bit-identically
    return repr(value) if isinstance(value, float) else str(value)


def write_config(path: PathLike, config: LratmConfig):
    lines = ["# LRATM solver configuration"]
    for name, value in config.model_dump().items():
        if value is None:
            continue
        lines.append(f"{FILE_KEY.get(name, name)} = {_format(value)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.debug(f"Wrote config to {path}")
