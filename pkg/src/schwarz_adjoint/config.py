"""
Experiment configuration for `schwarz-adjoint run` and `two-stage`.

A config file is a flat YAML mapping. Environment variables inside strings are
expanded (e.g., `${OUT_DIR}/t1.csv` or `${NX:-20}`), and command-line flags
override individual keys.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, fields, replace
from typing import Any, Dict, List, Optional, Union

import yaml

from schwarz_adjoint.constants import (
    CONVDIFF_ADJOINT_DEGREE,
    CONVDIFF_QOI_RECT,
    DEFAULT_STAGE2_BETA,
    DEFAULT_TAU,
    METHODS,
    OVERLAP_CONVENTIONS,
    POISSON_QOI_RECT,
    PROBLEMS,
    REFERENCE_MODES,
)
from schwarz_adjoint.geometry import UNIT_SQUARE, Rect, is_on_grid

LOG_LEVELS = ("debug", "info", "warning", "error")


class ConfigError(ValueError):
    """Raised when an experiment configuration is invalid."""


@dataclass
class ExperimentConfig:
    problem: str = "poisson"
    nx: int = 20
    ny: int = 20
    px: int = 2
    py: int = 1
    beta: float = 0.1
    overlap: str = "width"  # width | extension, see subdomain_extension()
    K: int = 2
    method: str = "multiplicative"
    tau: float = DEFAULT_TAU
    forward_degree: int = 1
    adjoint_degree: Optional[int] = None  # forward + 1, or 3 for convdiff
    qoi_rect: Optional[List[float]] = None  # x0, y0, x1, y1
    sweep_order: Union[str, List[int]] = "row"
    reference: str = "exact"  # exact | surrogate | none
    output: Optional[str] = None
    extended: bool = False
    log_level: str = "info"
    refine_subdomain: Optional[int] = None  # one-based, refined before solving
    stage2_beta: float = DEFAULT_STAGE2_BETA
    label: str = ""

    @property
    def p(self) -> int:
        return self.px * self.py

    def subdomain_extension(self) -> float:
        """How far each subdomain reaches past an interior partition line."""
        if self.overlap == "width":
            return self.beta / 2.0
        return self.beta

    def resolved_adjoint_degree(self) -> int:
        if self.adjoint_degree is not None:
            return int(self.adjoint_degree)
        if self.problem == "convdiff":
            return CONVDIFF_ADJOINT_DEGREE
        return self.forward_degree + 1

    def qoi_rectangle(self) -> Rect:
        if self.qoi_rect is not None:
            return Rect.from_sequence(self.qoi_rect)
        default = CONVDIFF_QOI_RECT if self.problem == "convdiff" else POISSON_QOI_RECT
        return Rect.from_sequence(default)

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_FIELD_TYPES = {
    "nx": int,
    "ny": int,
    "px": int,
    "py": int,
    "K": int,
    "forward_degree": int,
    "beta": float,
    "tau": float,
    "stage2_beta": float,
}


def _expand_env(obj: Any) -> Any:
    """Recursively expand environment variables within strings.

    Supports ${VAR} and ${VAR:-default}. Unset variables without a default become "".
    """

    def _expand_string(value: str) -> str:
        pattern = re.compile(r"\$\{([^}:]+)(:-([^}]+))?\}")

        def repl(match: re.Match[str]) -> str:
            return os.getenv(match.group(1), match.group(3) or "")

        return pattern.sub(repl, value)

    if isinstance(obj, str):
        return _expand_string(obj)
    if isinstance(obj, list):
        return [_expand_env(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _expand_env(v) for k, v in obj.items()}
    return obj


def _coerce_numbers(value: Any, cast=float) -> Optional[List]:
    if value is None or value == "":
        return None
    if isinstance(value, str):
        parts = [v.strip() for v in value.strip("[]() ").split(",") if v.strip()]
    elif isinstance(value, (list, tuple)):
        parts = list(value)
    else:
        raise ConfigError(f"Expected a list of numbers, got {value!r}")
    try:
        return [cast(v) for v in parts]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"Expected a list of numbers, got {value!r}") from exc


def _coerce_bool(value: Any) -> bool:
    if isinstance(value, str):
        return value.strip().lower() in {"1", "true", "yes", "on"}
    return bool(value)


def _coerce_sweep(value: Any) -> Union[str, List[int]]:
    if isinstance(value, str) and value.strip().lower() in {"row", "column"}:
        return value.strip().lower()
    return _coerce_numbers(value, int) or "row"


def _load_yaml(path: str) -> Dict[str, Any]:
    if not os.path.exists(path):
        raise FileNotFoundError(f"Config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must contain a flat mapping of keys")
    return _expand_env(data)


def apply_overrides(cfg: ExperimentConfig, overrides: Dict[str, Any]) -> ExperimentConfig:
    """Return a copy of ``cfg`` with the given keys replaced; None values are ignored."""
    known = {f.name for f in fields(ExperimentConfig)}
    changes: Dict[str, Any] = {}
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in known:
            raise ConfigError(f"Unknown config key '{key}'")
        try:
            if key in _FIELD_TYPES:
                value = _FIELD_TYPES[key](value)
            elif key in {"adjoint_degree", "refine_subdomain"}:
                value = None if value in ("", "none", "null") else int(value)
            elif key == "qoi_rect":
                value = _coerce_numbers(value)
            elif key == "sweep_order":
                value = _coerce_sweep(value)
            elif key == "extended":
                value = _coerce_bool(value)
            elif key in {"problem", "method", "overlap", "reference", "log_level"}:
                value = str(value).strip().lower()
            elif key in {"output", "label"}:
                value = str(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"Invalid value for '{key}': {value!r}") from exc
        changes[key] = value
    return replace(cfg, **changes)


def load_config(path: str, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    Load an experiment configuration from YAML and apply overrides.

    Raises:
        FileNotFoundError: when path does not exist
        ConfigError: when keys or values are invalid
    """
    data = _load_yaml(path)
    cfg = apply_overrides(ExperimentConfig(), data)
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    return validate_config(cfg)


def validate_config(cfg: ExperimentConfig) -> ExperimentConfig:
    """Check enums, ranges and mesh alignment before anything is solved."""
    if cfg.problem not in PROBLEMS:
        raise ConfigError(f"problem must be one of {PROBLEMS}, got '{cfg.problem}'")
    if cfg.method not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}, got '{cfg.method}'")
    if cfg.reference not in REFERENCE_MODES:
        raise ConfigError(f"reference must be one of {REFERENCE_MODES}, got '{cfg.reference}'")
    if cfg.log_level not in LOG_LEVELS:
        raise ConfigError(f"log_level must be one of {LOG_LEVELS}, got '{cfg.log_level}'")
    for name in ("nx", "ny", "px", "py", "K"):
        if getattr(cfg, name) < 1:
            raise ConfigError(f"{name} must be at least 1, got {getattr(cfg, name)}")
    if cfg.method == "additive" and not cfg.tau > 0:
        raise ConfigError(f"tau must be positive for additive Schwarz, got {cfg.tau}")
    if cfg.forward_degree not in (1, 2, 3):
        raise ConfigError(f"forward_degree must be 1, 2 or 3, got {cfg.forward_degree}")
    q = cfg.resolved_adjoint_degree()
    if q not in (1, 2, 3) or q < cfg.forward_degree:
        raise ConfigError(
            f"adjoint_degree must be in 1..3 and at least forward_degree={cfg.forward_degree}, got {q}"
        )

    if cfg.overlap not in OVERLAP_CONVENTIONS:
        raise ConfigError(f"overlap must be one of {OVERLAP_CONVENTIONS}, got '{cfg.overlap}'")
    hx, hy = UNIT_SQUARE.width / cfg.nx, UNIT_SQUARE.height / cfg.ny
    if cfg.beta < 0:
        raise ConfigError(f"beta must be non-negative, got {cfg.beta}")
    if cfg.p > 1 and cfg.beta == 0:
        raise ConfigError("beta must be positive when there is more than one subdomain")
    ext = cfg.subdomain_extension()
    for count, spacing, n, axis, size in ((cfg.px, hx, cfg.nx, "px", "width"), (cfg.py, hy, cfg.ny, "py", "height")):
        if count == 1:
            continue
        if not is_on_grid(ext, spacing):
            raise ConfigError(
                f"beta={cfg.beta} ({cfg.overlap}) widens subdomains by {ext:g}, not a multiple of the cell {size} {spacing:g}"
            )
        if not is_on_grid(1.0 / count, spacing):
            raise ConfigError(f"{axis}={count} partition lines do not fall on mesh lines for n={n}")
        if ext > 1.0 / count + 1e-12:
            raise ConfigError(f"beta={cfg.beta} ({cfg.overlap}) exceeds the base subdomain {size} {1.0 / count:g}")

    try:
        rect = cfg.qoi_rectangle()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if rect.is_degenerate() or not UNIT_SQUARE.contains_rect(rect):
        raise ConfigError(f"qoi_rect {rect} must be a nondegenerate rectangle inside the unit square")
    for value, spacing, axis in ((rect.x0, hx, "x"), (rect.x1, hx, "x"), (rect.y0, hy, "y"), (rect.y1, hy, "y")):
        if not is_on_grid(value, spacing):
            raise ConfigError(f"qoi_rect {axis}-coordinate {value:g} is not on a mesh line (spacing {spacing:g})")

    if isinstance(cfg.sweep_order, list) and sorted(cfg.sweep_order) != list(range(cfg.p)):
        raise ConfigError(f"sweep_order {cfg.sweep_order} is not a permutation of 0..{cfg.p - 1}")
    if cfg.refine_subdomain is not None and not 1 <= cfg.refine_subdomain <= cfg.p:
        raise ConfigError(f"refine_subdomain must be between 1 and {cfg.p}, got {cfg.refine_subdomain}")
    if cfg.stage2_beta < 0:
        raise ConfigError(f"stage2_beta must be non-negative, got {cfg.stage2_beta}")
    return cfg
