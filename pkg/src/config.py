"""
Experiment configuration files.
INI files with [experiment], [parameters], [shocks] and [sweep] sections map
onto ExperimentConfig; unknown sections or keys are rejected.
"""

import os
import logging
import configparser
from dataclasses import asdict, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

try:
    from .errors import ConfigError, SimulationError
    from .ensemble import ExperimentConfig, TopologyKind
except ImportError:
    # Fallback for direct execution
    from errors import ConfigError, SimulationError
    from ensemble import ExperimentConfig, TopologyKind

logger = logging.getLogger(__name__)

PROJECT_ROOT = Path(__file__).resolve().parent.parent
PRESET_DIR = PROJECT_ROOT / "presets"
PRESETS = ("fig4", "fig5", "fig6", "smoke")


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_grid(text: str):
    """Comma- or newline-separated grid values."""
    return tuple(float(v) for v in text.replace("\n", ",").split(",") if v.strip())


def _parse_optional_float(text: str) -> Optional[float]:
    return None if text.strip().lower() in ("", "auto", "calibrate") else float(text)


# section -> key -> (ExperimentConfig field, parser)
SCHEMA: Dict[str, Dict[str, tuple]] = {
    "experiment": {
        "name": ("name", str),
        "topology": ("topology", TopologyKind),
        "n_banks": ("n_banks", int),
        "n_assets": ("n_assets", int),
        "samples": ("samples", int),
        "master_seed": ("master_seed", int),
    },
    "parameters": {
        "interbank_ratio": ("interbank_ratio", float),
        "gamma_shadow": ("gamma_shadow", float),
        "gamma_regulated": ("gamma_regulated", float),
        "denseness": ("denseness", float),
        "concentration": ("concentration", float),
        "concentration_tolerance": ("concentration_tolerance", float),
        "strict_concentration": ("strict_concentration", _parse_bool),
        "shadow_fraction": ("shadow_fraction", float),
        "coupling": ("coupling", float),
    },
    "shocks": {
        "dof": ("dof", float),
        "calibration_gamma": ("calibration_gamma", float),
        "target_p": ("target_p", float),
        "scale": ("shock_scale", _parse_optional_float),
    },
    "sweep": {
        "variable": ("sweep_variable", str),
        "grid": ("grid", parse_grid),
    },
}


def preset_path(name: str) -> Path:
    if name not in PRESETS:
        raise ConfigError(f"Unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return PRESET_DIR / f"{name}.ini"


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(f"{source}: {e}")

    values: Dict[str, Any] = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"{source}: unknown key {key!r} in [{section}]")
            name, convert = SCHEMA[section][key]
            try:
                values[name] = convert(raw)
            except (ValueError, TypeError) as e:
                raise ConfigError(f"{source}: bad value for {section}.{key}: {e}")

    return finalize(ExperimentConfig(**values), source)


def load_config(path: str) -> ExperimentConfig:
    if not os.path.exists(path):
        raise ConfigError(f"Config file not found: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        return parse_config(f.read(), source=str(path))


def finalize(config: ExperimentConfig, source: str = "<config>") -> ExperimentConfig:
    """Validate, reporting the offending constraint as a ConfigError."""
    try:
        config.validate()
    except SimulationError as e:
        raise ConfigError(f"{source}: infeasible configuration: {e}")
    return config


def apply_overrides(config: ExperimentConfig, samples: Optional[int] = None, seed: Optional[int] = None,
                    n_banks: Optional[int] = None, variable: Optional[str] = None,
                    grid: Optional[Sequence[float]] = None) -> ExperimentConfig:
    changes = {}
    if samples is not None:
        changes["samples"] = samples
    if seed is not None:
        changes["master_seed"] = seed
    if n_banks is not None:
        changes["n_banks"] = n_banks
    if variable is not None:
        changes["sweep_variable"] = variable
    if grid is not None:
        changes["grid"] = tuple(grid)
    if not changes:
        return config
    logger.info(f"Config overrides: {changes}")
    return finalize(replace(config, **changes), "overrides")


def config_to_dict(config: ExperimentConfig) -> Dict[str, Any]:
    data = asdict(config)
    data["topology"] = config.topology.value
    data["grid"] = list(config.grid)
    return data


def config_from_dict(data: Dict[str, Any]) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"Unknown config fields: {', '.join(sorted(unknown))}")
    data = dict(data)
    if "topology" in data:
        data["topology"] = TopologyKind(data["topology"])
    if "grid" in data:
        data["grid"] = tuple(data["grid"])
    return finalize(ExperimentConfig(**data), "manifest")
