"""
Configuration loading
Process settings from the environment (.env aware) and key = value sweep files
"""

import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Union

from dotenv import dotenv_values, load_dotenv
from jsonschema import Draft7Validator
from pydantic import ValidationError

from .models import SweepConfig

logger = logging.getLogger(__name__)


class ConfigurationError(ValueError):
    """Raised when a configuration file fails validation"""


SWEEP_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "required": ["design", "base", "m_min", "m_max", "s", "integrand", "out"],
    "additionalProperties": False,
    "properties": {
        "design": {
            "type": "array", "minItems": 1,
            "items": {"enum": ["hrd", "urd", "lms-sobol", "hrd-opt", "urd-opt", "lms-sobol-opt"]},
        },
        "base": {
            "type": "array", "minItems": 1,
            "items": {"enum": [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31]},
        },
        "m_min": {"type": "integer", "minimum": 1},
        "m_max": {"type": "integer", "minimum": 1},
        "s": {"type": "integer", "minimum": 1},
        "integrand": {"enum": ["product_power", "lognormal", "t_exp"]},
        "c": {"type": "number", "exclusiveMinimum": 0},
        "weight_mode": {"enum": ["exp", "equal"]},
        "r_mode": {"enum": ["fixed", "m_log_m"]},
        "r": {"type": "integer", "minimum": 1},
        "batches": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "out": {"type": "string", "minLength": 1},
        "workers": {"type": "integer", "minimum": 1},
        "shift": {"type": "boolean"},
        "log_base": {"enum": ["e", "2", "10"]},
        "aggregate": {"enum": ["median", "mean"]},
        "select_r": {"type": "integer", "minimum": 1},
        "alpha": {"enum": [1, 2]},
    },
}

_LIST_KEYS = {"design", "base"}
_INT_KEYS = {"m_min", "m_max", "s", "r", "batches", "seed", "workers", "select_r", "alpha"}
_FLOAT_KEYS = {"c"}
_BOOL_KEYS = {"shift"}
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _to_number(text: str, kind):
    try:
        return kind(text)
    except ValueError:
        return text


def _coerce(key: str, raw: Optional[str]) -> Any:
    """Type a raw string value; unparseable values stay strings for the schema to report"""
    text = "" if raw is None else raw.strip()
    if key in _LIST_KEYS:
        items = [item.strip().lower() for item in text.split(",") if item.strip()]
        if key == "base":
            return [_to_number(item, int) for item in items]
        return [item.replace("_", "-") for item in items]
    if key in _INT_KEYS:
        return _to_number(text, int)
    if key in _FLOAT_KEYS:
        return _to_number(text, float)
    if key in _BOOL_KEYS:
        lowered = text.lower()
        if lowered in _TRUE:
            return True
        if lowered in _FALSE:
            return False
        return text
    return text


def parse_sweep_values(raw: Dict[str, Optional[str]]) -> Dict[str, Any]:
    return {key.strip().lower(): _coerce(key.strip().lower(), value) for key, value in raw.items()}


def validate_sweep_values(values: Dict[str, Any]) -> SweepConfig:
    """Validate typed sweep values; every problem is reported at once"""
    validator = Draft7Validator(SWEEP_SCHEMA)
    errors = []
    for error in sorted(validator.iter_errors(values), key=lambda e: list(e.path)):
        where = ".".join(str(p) for p in error.path)
        errors.append(f"{where}: {error.message}" if where else error.message)
    if errors:
        raise ConfigurationError(f"Configuration validation failed: {'; '.join(errors)}")

    fields = dict(values)
    fields["designs"] = fields.pop("design")
    fields["bases"] = fields.pop("base")
    try:
        return SweepConfig(**fields)
    except ValidationError as e:
        problems = [f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" if err["loc"] else err["msg"]
                    for err in e.errors()]
        raise ConfigurationError(f"Configuration validation failed: {'; '.join(problems)}") from None


def load_sweep_config(path: Union[str, Path]) -> SweepConfig:
    """Load and validate a key = value sweep configuration file"""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Configuration file not found: {path}")
    values = parse_sweep_values(dotenv_values(path))
    config = validate_sweep_values(values)
    logger.info(f"Sweep configuration loaded from {path}: designs={config.designs}, "
                f"bases={config.bases}, m={config.m_min}..{config.m_max}, s={config.s}")
    return config


@dataclass(frozen=True)
class Settings:
    """Process-level settings taken from the environment"""
    seed: int = 0
    workers: int = 1
    sweep_config: Optional[str] = None
    log_level: str = "INFO"
    log_format: str = "text"

    @classmethod
    def from_env(cls, dotenv_path: Optional[str] = None) -> "Settings":
        load_dotenv(dotenv_path)
        errors = []
        seed = os.getenv("HANKELNET_SEED", "0")
        workers = os.getenv("HANKELNET_WORKERS", "1")
        if not seed.isdigit() or int(seed) >= 2 ** 64:
            errors.append(f"HANKELNET_SEED must be a 64-bit unsigned integer, got {seed!r}")
        if not workers.isdigit() or int(workers) < 1:
            errors.append(f"HANKELNET_WORKERS must be a positive integer, got {workers!r}")
        log_format = os.getenv("LOG_FORMAT", "text").lower()
        if log_format not in ("json", "text"):
            errors.append(f"LOG_FORMAT must be json or text, got {log_format!r}")
        if errors:
            raise ConfigurationError(f"Configuration validation failed: {'; '.join(errors)}")
        return cls(
            seed=int(seed),
            workers=int(workers),
            sweep_config=os.getenv("HANKELNET_SWEEP_CONFIG") or None,
            log_level=os.getenv("LOG_LEVEL", "INFO").upper(),
            log_format=log_format,
        )
