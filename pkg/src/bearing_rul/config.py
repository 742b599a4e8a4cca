"""Flat ``key = value`` config files.

Blank lines and ``#`` comments are ignored. Values stay strings; callers
coerce them against their own schema.
"""
from __future__ import annotations

from pathlib import Path


class ConfigError(ValueError):
    pass


def parse_kv(text, source="<string>"):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out[key] = value
    return out


def read_kv(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_kv(text, str(path))


def coerce(values, schema, source="config"):
    """Convert string values with ``schema[key]`` (a callable); unknown keys raise."""
    out = {}
    for key, raw in values.items():
        if key not in schema:
            raise ConfigError(f"{source}: unknown key {key!r} (known: {', '.join(sorted(schema))})")
        conv = schema[key]
        try:
            out[key] = conv(raw) if isinstance(raw, str) or conv is not str else raw
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{source}: bad value for {key!r}: {raw!r}") from exc
    return out


def to_bool(s):
    if isinstance(s, bool):
        return s
    low = str(s).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")
