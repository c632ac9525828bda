"""Load solver config from YAML and build SolverConfig. Paths are resolved relative to cwd."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Any, Mapping

import yaml

from packsdp.src.errors import ConfigError

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent / "config" / "solver_config.yml"

DEFAULT_EPS = 0.1
DEFAULT_REFRESH_INTERVAL = 500
DIRECT_ROOT_MAX_N = 64


class ThetaStrategy(str, Enum):
    BINARY_SEARCH = "binary_search"
    DIRECT_ROOT = "direct_root"


@dataclass(frozen=True)
class SolverConfig:
    eps: float = DEFAULT_EPS
    seed: int = 0
    max_iterations: int = 0  # 0: four times the iteration bound
    theta_strategy: ThetaStrategy = ThetaStrategy.BINARY_SEARCH
    dense_init: bool = False
    refresh_interval: int = DEFAULT_REFRESH_INTERVAL
    debug_spectrum_checks: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.eps < 0.5:
            raise ConfigError(f"eps must lie in (0, 0.5), got {self.eps}")
        if self.max_iterations < 0:
            raise ConfigError(f"max_iterations must be >= 0, got {self.max_iterations}")
        if self.refresh_interval < 1:
            raise ConfigError(f"refresh_interval must be >= 1, got {self.refresh_interval}")

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any] | None) -> "SolverConfig":
        raw = dict(raw or {})
        known = {"eps", "seed", "max_iterations", "theta_strategy", "dense_init", "refresh_interval", "debug_spectrum_checks"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"Unknown solver config keys: {sorted(unknown)}")
        try:
            if "theta_strategy" in raw:
                raw["theta_strategy"] = ThetaStrategy(raw["theta_strategy"])
            for key, cast in (("eps", float), ("seed", int), ("max_iterations", int), ("refresh_interval", int)):
                if key in raw:
                    raw[key] = cast(raw[key])
            for key in ("dense_init", "debug_spectrum_checks"):
                if key in raw:
                    raw[key] = bool(raw[key])
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid solver config: {e}") from e
        return cls(**raw)

    def with_overrides(self, **overrides: Any) -> "SolverConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


def load_config(config_path: str | Path = DEFAULT_CONFIG_PATH) -> dict[str, Any]:
    """Load solver_config.yml (or given path). Returns a dict; missing file raises FileNotFoundError."""
    path = Path(config_path).resolve()
    if not path.exists():
        raise FileNotFoundError(f"Config not found: {path}")
    with open(path) as f:
        return yaml.safe_load(f) or {}


def certificate_tolerances(config: Mapping[str, Any]) -> dict[str, float]:
    raw = config.get("certificate", {}) or {}
    return {
        "violation_tol": float(raw.get("violation_tol", 1e-7)),
        "spectral_tol": float(raw.get("spectral_tol", 1e-7)),
        "ratio_slack": float(raw.get("ratio_slack", 1e-9)),
    }
