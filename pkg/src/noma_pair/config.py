"""Flat ``key = value`` configuration files.

Blank lines and lines starting with ``#`` are ignored; a trailing ``# ...``
comment on a value line is stripped.  ``:`` is accepted in place of ``=``.
Values are returned as stripped strings; callers convert them.
"""

from __future__ import annotations

from pathlib import Path

from .errors import ConfigurationError


def parse_key_value(text: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":" if ":" in line else None
        if sep is None:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split(sep, 1))
        if not key:
            raise ConfigurationError(f"line {lineno}: empty key")
        if key in values:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}", field=key)
        values[key] = value
    return values


def read_key_value_file(path) -> dict[str, str]:
    return parse_key_value(Path(path).read_text())


def parse_list(value: str) -> list[str]:
    """Split a comma or whitespace separated list."""
    return [item for item in value.replace(",", " ").split() if item]


def parse_range(value: str) -> list[float]:
    """Parse ``a,b,c`` or ``start:stop:step`` (stop inclusive) into floats."""
    value = value.strip()
    if ":" in value and "," not in value:
        parts = [float(p) for p in value.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ConfigurationError(f"range must be start:stop:step with step > 0, got {value!r}")
        start, stop, step = parts
        count = int(round((stop - start) / step)) + 1
        return [start + i * step for i in range(max(count, 0))]
    return [float(v) for v in parse_list(value)]
