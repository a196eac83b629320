"""Run configuration parsing."""
from __future__ import annotations

import pytest
from typing_extensions import Self

from itelab.click_opt.run_config import RunConfig, apply_overrides, parse_config, parse_value
from itelab.constant import DEFAULT_CONFIG
from itelab.exceptions import ConfigError

CONFIG_TEXT = """
# disk benchmark
[domain]
kind = unit_square
[media]
preset = "contrast(2, 1, 2, 1)"   # quoted
[solver]
deltas = 0.1, 0.01
[spectral]
k = 0x10
extrapolate = yes
mesh.n = 24
"""


class TestRunConfig:
    """Defaults, parsing and overrides."""

    def test_defaults(self: Self) -> None:
        """Every key starts at its default and is exposed as an attribute."""
        cfg = RunConfig()
        assert cfg.values == DEFAULT_CONFIG
        assert cfg.mesh_n == DEFAULT_CONFIG["mesh.n"]
        assert cfg.get("spectral.variant") == "T3"

    def test_unknown_key(self: Self) -> None:
        """Unknown keys are refused everywhere."""
        with pytest.raises(ConfigError):
            RunConfig({"mesh.size": 3})
        with pytest.raises(ConfigError):
            RunConfig().get("nope.key")

    def test_parse_sections_and_comments(self: Self) -> None:
        """Sections prefix bare keys, dotted keys stand alone and comments are dropped."""
        cfg = parse_config(CONFIG_TEXT)
        assert cfg.domain_kind == "unit_square"
        assert cfg.media_preset == "contrast(2, 1, 2, 1)"
        assert cfg.solver_deltas == [0.1, 0.01]
        assert cfg.spectral_k == 16
        assert cfg.spectral_extrapolate is True
        assert cfg.mesh_n == 24
        assert cfg.oracle_m_max == DEFAULT_CONFIG["oracle.m_max"]

    def test_bad_line_reports_its_number(self: Self) -> None:
        """Errors carry the offending line."""
        with pytest.raises(ConfigError) as error:
            parse_config("[mesh]\nn = 8\nthis line has no equals sign\n")
        assert error.value.line == 3
        assert "line 3" in str(error.value)

    @pytest.mark.parametrize(
        ("key", "raw"),
        [("mesh.n", "eight"), ("output.quiet", "maybe"), ("solver.deltas", "0.1, x"), ("solver.lambda0", "fast")],
    )
    def test_bad_values(self: Self, key: str, raw: str) -> None:
        """Values are parsed with the type of the default."""
        with pytest.raises(ConfigError):
            parse_value(key, raw)

    def test_overrides_and_text(self: Self) -> None:
        """Overrides apply after the file and the rendering parses back to the same values."""
        cfg = apply_overrides(parse_config(CONFIG_TEXT), [("mesh.n", "32"), ("output.debug", "on")])
        assert cfg.mesh_n == 32
        assert cfg.output_debug is True
        again = parse_config(cfg.to_text())
        assert again.values == cfg.values

    def test_updated_is_a_copy(self: Self) -> None:
        """updated leaves the original untouched."""
        cfg = RunConfig()
        changed = cfg.updated({"mesh.n": 4})
        assert changed.mesh_n == 4
        assert cfg.mesh_n == DEFAULT_CONFIG["mesh.n"]
        assert '"mesh.n": 4' in str(changed)
