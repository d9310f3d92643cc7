"""Configuration module for coherent-loops.

Loads and validates run configuration from TOML (or JSON, by file suffix).
Every key mirrors a command-line flag; flags win over file values.
"""

import json
import math
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Type

if sys.version_info >= (3, 11):
    import tomllib
else:
    try:
        import tomli as tomllib
    except ImportError:
        raise ImportError(
            "Python < 3.11 requires 'tomli' package. Install with: pip install tomli"
        )


class ConfigError(ValueError):
    """Raised for invalid or unknown configuration."""


# Validation bounds. Kept as module-level constants so the limits are
# discoverable and adjustable in one place.
MAX_LEVEL = 2000
MAX_GRID = 4096
MIN_GRID = 2
VALID_COMMANDS = ("wigner", "field", "torus", "verify")
VALID_FORMATS = ("csv", "json")
VALID_VARY = ("beta", "m2")
VALID_STATES = ("loop", "coherent", "pair")
VALID_LIFT_SIGNS = (-1, 1)
VALID_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


def parse_beta_range(text: str) -> Tuple[float, float, float]:
    """Parse "start:stop:step" into floats. Raises ValueError."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ValueError(f"beta_range must look like start:stop:step, got {text!r}")
    start, stop, step = (float(p) for p in parts)
    if step <= 0:
        raise ValueError("beta_range step must be > 0")
    if stop < start:
        raise ValueError("beta_range is empty (stop < start)")
    return start, stop, step


def parse_grid(text: str) -> Tuple[int, int]:
    """Parse "NxM" into a pair of ints. Raises ValueError."""
    parts = str(text).lower().split("x")
    if len(parts) != 2:
        raise ValueError(f"grid must look like NxM, got {text!r}")
    n, m = (int(p) for p in parts)
    for size in (n, m):
        if not MIN_GRID <= size <= MAX_GRID:
            raise ValueError(f"grid sizes must be between {MIN_GRID} and {MAX_GRID}")
    return n, m


def _check_half_integer(name: str, value: float) -> int:
    twice = 2.0 * float(value)
    if not math.isfinite(twice) or abs(twice - round(twice)) > 1e-9:
        raise ValueError(f"{name} must be an integer or half-integer, got {value}")
    return int(round(twice))


@dataclass
class ParametersConfig:
    """Numerical parameters shared by the commands.

    Exactly one of j and k is needed; the other is derived (k = 2j).
    """
    j: Optional[float] = None
    k: Optional[int] = None
    m1: float = 11.0
    m2: float = 22.0
    beta: float = 1.2
    beta_range: str = "0.05:3.10:0.01"
    vary: str = "beta"
    grid: str = "128x128"
    nodes: Optional[int] = None
    state: str = "loop"

    def __post_init__(self):
        if self.j is None and self.k is None:
            self.j = 25.0
        if self.k is not None:
            if isinstance(self.k, bool) or int(self.k) != self.k:
                raise ValueError(f"k must be an integer, got {self.k}")
            self.k = int(self.k)
        if self.j is not None:
            twice_j = _check_half_integer("j", self.j)
            if self.k is not None and self.k != twice_j:
                raise ValueError(f"j={self.j} and k={self.k} disagree (k must equal 2j)")
            self.k = twice_j
        if not 0 <= self.k <= MAX_LEVEL:
            raise ValueError(f"k must be between 0 and {MAX_LEVEL}")
        self.j = self.k / 2
        for name in ("m1", "m2"):
            twice_m = _check_half_integer(name, getattr(self, name))
            if (self.k - twice_m) % 2:
                raise ValueError(f"{name}={getattr(self, name)} has the wrong integrality for j={self.j}")
            if abs(twice_m) > self.k:
                raise ValueError(f"{name} must lie between -j and j (j={self.j})")
        if not math.isfinite(self.beta):
            raise ValueError("beta must be finite")
        parse_beta_range(self.beta_range)
        parse_grid(self.grid)
        if self.vary not in VALID_VARY:
            raise ValueError(f"vary must be one of {VALID_VARY}")
        if self.state not in VALID_STATES:
            raise ValueError(f"state must be one of {VALID_STATES}")
        if self.nodes is not None and self.nodes < 2:
            raise ValueError("nodes must be >= 2")

    @property
    def beta_values(self) -> Tuple[float, ...]:
        start, stop, step = parse_beta_range(self.beta_range)
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(start + i * step for i in range(count))

    @property
    def grid_shape(self) -> Tuple[int, int]:
        return parse_grid(self.grid)


@dataclass
class TolerancesConfig:
    """Tolerance configuration."""
    tol: float = 1e-8
    tol_scale: float = 1.0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if not self.tol_scale > 0:
            raise ValueError("tol_scale must be > 0")


@dataclass
class OutputConfig:
    """Output configuration. No path means stdout."""
    path: Optional[Path] = None
    format: str = "csv"

    def __post_init__(self):
        if self.path is not None and str(self.path).strip() != "":
            self.path = Path(self.path).expanduser()
        else:
            self.path = None
        if self.format not in VALID_FORMATS:
            raise ValueError(f"format must be one of {VALID_FORMATS}")


@dataclass
class ProcessingConfig:
    """Processing configuration."""
    workers: int = 4
    log_level: str = "INFO"

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.log_level.upper() not in VALID_LOG_LEVELS:
            raise ValueError(
                f"log_level must be one of {VALID_LOG_LEVELS}"
            )
        self.log_level = self.log_level.upper()


@dataclass
class VerifyConfig:
    """Invariant-suite configuration."""
    trials: int = 100
    seed: int = 20240521
    lift_sign: int = -1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.lift_sign not in VALID_LIFT_SIGNS:
            raise ValueError(f"lift_sign must be one of {VALID_LIFT_SIGNS}")


@dataclass
class Config:
    """Main configuration object."""
    parameters: ParametersConfig = field(default_factory=ParametersConfig)
    tolerances: TolerancesConfig = field(default_factory=TolerancesConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    processing: ProcessingConfig = field(default_factory=ProcessingConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    command: str = "wigner"

    def __post_init__(self):
        if self.command not in VALID_COMMANDS:
            raise ConfigError(f"command must be one of {VALID_COMMANDS}, got {self.command!r}")


_SECTIONS = {
    "parameters": ParametersConfig,
    "tolerances": TolerancesConfig,
    "output": OutputConfig,
    "processing": ProcessingConfig,
    "verify": VerifyConfig,
}


def _build_section(
    section: str,
    data: Dict[str, Any],
    dataclass_cls: Type,
) -> Any:
    """Instantiate a config dataclass with typo-friendly diagnostics."""
    if not isinstance(data, dict):
        raise ConfigError(f"[{section}] must be a table, got {type(data).__name__}")
    known = {f.name for f in fields(dataclass_cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(
            f"Unknown key(s) in [{section}]: {unknown}. "
            f"Valid keys: {sorted(known)}"
        )
    try:
        return dataclass_cls(**data)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"[{section}] {e}") from e


def update_section(section: str, current: Any, **changes: Any) -> Any:
    """dataclasses.replace with section-tagged errors; re-runs validation."""
    try:
        return replace(current, **changes)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"[{section}] {e}") from e


def default_config() -> Config:
    return Config()


def load_config(config_path: Path) -> Config:
    """Load and validate configuration from a TOML or JSON file.

    Args:
        config_path: Path to the configuration file; a ``.json`` suffix
            selects JSON, anything else is read as TOML.

    Returns:
        Validated Config object

    Raises:
        FileNotFoundError: If config file doesn't exist
        ConfigError: If configuration is malformed, invalid or contains
            unknown sections or keys
    """
    config_path = Path(config_path)
    if not config_path.exists():
        raise FileNotFoundError(f"Configuration file not found: {config_path}")

    try:
        if config_path.suffix.lower() == ".json":
            with open(config_path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        else:
            with open(config_path, 'rb') as f:
                data = tomllib.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Malformed JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"Malformed TOML: {e}") from e

    if not isinstance(data, dict):
        raise ConfigError("Configuration root must be a table of sections")
    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise ConfigError(
            f"Unknown section(s): {unknown}. Valid sections: {sorted(_SECTIONS)}"
        )

    return Config(**{
        name: _build_section(name, data.get(name, {}), cls)
        for name, cls in _SECTIONS.items()
    })
