"""Run configuration."""
from __future__ import annotations

import json
from copy import deepcopy
from typing import Any

from typing_extensions import Self

from itelab.constant import DEFAULT_CONFIG
from itelab.exceptions import ConfigError
from itelab.strings import bad_line, bad_value, unknown_key

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


class RunConfig(object):
    """Every setting of a run, keyed by "section.key" and exposed as section_key attributes."""

    # Explicitly declare all attributes with their types
    domain_kind: str
    domain_r_inner: float
    domain_vertices: list[float]
    media_preset: str
    diffeo_eps: float
    diffeo_r_cut: float
    hypothesis_name: str
    hypothesis_alpha_or_beta: float
    hypothesis_tau: float
    hypothesis_slack: float
    hypothesis_samples: int
    hypothesis_boundary_samples: int
    mesh_n: int
    mesh_refine: int
    solver_lambda0: float
    solver_deltas: list[float]
    solver_sweep_rtol: float
    solver_load: float
    spectral_variant: str
    spectral_k: int
    spectral_tol: float
    spectral_max_iter: int
    spectral_seed: int
    spectral_delta: float
    spectral_extrapolate: bool
    spectral_t3_lambda: float
    spectral_eps: float
    spectral_discreteness: bool
    halfspace_a1: float
    halfspace_a2: float
    halfspace_s1: float
    halfspace_s2: float
    halfspace_amplitude: float
    halfspace_period: float
    halfspace_points: int
    halfspace_lam_grid: list[float]
    decay_lam_grid: list[float]
    decay_s: float
    decay_imaginary: bool
    decay_alpha: float
    decay_multiplier_grid: list[float]
    oracle_lam_max: float
    oracle_m_max: int
    verify_eig_rtol: float
    verify_identity_rtol: float
    verify_slope_range: list[float]
    verify_ratio_max: float
    verify_r2_min: float
    verify_fem_rtol: float
    verify_strip_nx: int
    verify_strip_nt: int
    verify_strip_depth: float
    verify_complementing_pairs: int
    verify_order_range: list[float]
    verify_negative_min: float
    verify_pushforward_eps: float
    verify_discreteness_shift: float
    output_dir: str
    output_quiet: bool
    output_debug: bool

    def __init__(self: Self, values: dict[str, Any] | None = None) -> None:
        given = values or {}
        for key in given:
            if key not in DEFAULT_CONFIG:
                raise ConfigError(unknown_key.format(key=key))
        self.values: dict[str, Any] = {key: deepcopy(given.get(key, default)) for key, default in DEFAULT_CONFIG.items()}
        for key, value in self.values.items():
            setattr(self, key.replace(".", "_"), value)

    def get(self: Self, key: str) -> Any:
        """Value of a dotted key."""
        if key not in self.values:
            raise ConfigError(unknown_key.format(key=key))
        return self.values[key]

    def updated(self: Self, changes: dict[str, Any]) -> RunConfig:
        """Copy with some keys replaced."""
        return RunConfig({**self.values, **changes})

    def to_text(self: Self) -> str:
        """Round-trippable ``[section]`` / ``key = value`` text."""
        lines: list[str] = []
        section = ""
        for key in sorted(self.values):
            head, name = key.split(".", 1)
            if head != section:
                lines.extend([*([""] if lines else []), f"[{head}]"])
                section = head
            lines.append(f"{name} = {_format(self.values[key])}")
        return "\n".join(lines) + "\n"

    def __str__(self: Self) -> str:
        """Print the class."""
        return json.dumps(self.values, indent=4, default=str)


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, list):
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_value(key: str, raw: str, line: int | None = None) -> Any:
    """Parse raw text with the type of the key's default."""
    if key not in DEFAULT_CONFIG:
        raise ConfigError(unknown_key.format(key=key), line=line)
    default = DEFAULT_CONFIG[key]
    text = raw.strip()
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered not in _TRUE | _FALSE:
                raise ValueError(text)
            return lowered in _TRUE
        if isinstance(default, int):
            return int(text, 0)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, list):
            return [float(item) for item in text.strip("[]").split(",") if item.strip()]
    except ValueError as e:
        kind = "list of floats" if isinstance(default, list) else type(default).__name__
        raise ConfigError(bad_value.format(value=raw, key=key, kind=kind), line=line) from e
    return text.strip("\"'")


def parse_config(text: str) -> RunConfig:
    """Read ``key = value`` lines with ``#`` comments and ``[section]`` headers; unset keys keep their defaults."""
    values: dict[str, Any] = {}
    section = ""
    for number, original in enumerate(text.splitlines(), start=1):
        line = original.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError(bad_line.format(text=original), line=number)
        name, raw = (part.strip() for part in line.split("=", 1))
        key = name if "." in name or not section else f"{section}.{name}"
        values[key] = parse_value(key, raw, number)
    return RunConfig(values)


def apply_overrides(cfg: RunConfig, pairs: list[tuple[str, str]]) -> RunConfig:
    """Apply ``section.key=value`` overrides after the file."""
    return cfg.updated({key: parse_value(key, raw) for key, raw in pairs})
