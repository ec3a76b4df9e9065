"""
Reading and writing ``key = value`` text files.

Values are cast with django-environ's parser so scenario files accept the
same literals as ``.env`` files (ints, floats, comma lists, booleans).
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

import environ

from apps.utils.exceptions import ScenarioError


def parse_lines(text: str) -> dict[str, str]:
    """Split text into a raw ``{key: value}`` mapping.

    Blank lines and ``#`` comments are ignored; a repeated key is an error.
    """
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ScenarioError(f"line {lineno}: empty key")
        if key in entries:
            raise ScenarioError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = value
    return entries


def read_file(path: str | Path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"scenario file not found: {path}")
    return parse_lines(path.read_text(encoding="utf-8"))


def cast(entries: dict[str, str], key: str, kind: Any, default: Any = None) -> Any:
    """Cast one entry via ``environ.Env.parse_value``.

    ``kind`` follows django-environ conventions: ``int``, ``float``, ``bool``,
    ``str`` or a one-element list such as ``[float]`` for comma lists.
    """
    if key not in entries:
        if default is None:
            raise ScenarioError(f"missing required key {key!r}")
        return default
    try:
        if kind is float:
            # environ strips exponent characters from scalar floats
            return float(entries[key])
        return environ.Env.parse_value(entries[key], kind)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(
            f"key {key!r}: cannot parse {entries[key]!r} ({exc})"
        ) from exc


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list | tuple):
        return ",".join(format_value(item) for item in value)
    return str(value)


def canonical_text(entries: dict[str, Any]) -> str:
    """Sorted, normalized rendering used for hashing and file embedding."""
    return "".join(f"{key} = {format_value(entries[key])}\n" for key in sorted(entries))
