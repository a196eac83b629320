"""Custom Click types."""
from __future__ import annotations

from typing import Any

from click import Context, Parameter, ParamType
from typing_extensions import Self

from itelab.strings import invalid_key_value


class FormatError(ValueError):
    """Invalid input format."""


class KeyValue(ParamType):
    """Dotted config override ``section.key=value``."""

    name = "section.key=value"

    def _split(self: Self, value: str) -> tuple[str, str]:
        key, sep, raw = value.partition("=")
        key = key.strip()
        if not sep or "." not in key or not raw.strip():
            raise FormatError(value)
        return key, raw.strip()

    def convert(self: Self, value: Any, param: Parameter | None, ctx: Context | None) -> tuple[str, str]:
        """Convert str to a (key, raw value) pair."""
        if isinstance(value, tuple):
            return value
        try:
            return self._split(str(value))
        except FormatError:
            self.fail(invalid_key_value.format(value=value), param, ctx)


key_value = KeyValue()
