"""Plain-text experiment configs: INI-style ``key = value`` sections.

Each experiment reads one section (named after the subcommand, hyphens
replaced by underscores); values are coerced to the types of the config
dataclass's defaults, with comma-separated lists for tuple fields.
"""

import configparser
import dataclasses
from pathlib import Path


class ConfigError(ValueError):
    """Bad config file; the message carries file/line context when known."""


def _coerce(raw, default):
    if isinstance(default, bool):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if isinstance(default, tuple):
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        elem = default[0] if default else 0.0
        if isinstance(elem, str):
            return tuple(parts)
        if isinstance(elem, int) and not isinstance(elem, bool):
            return tuple(int(p) for p in parts)
        return tuple(float(p) for p in parts)
    return raw.strip()


def load_config(path, section, cls):
    """Instantiate config dataclass ``cls`` from ``[section]`` of an INI file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: config file not found")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not parser.has_section(section):
        raise ConfigError(f"{path}: missing section [{section}]")

    defaults = {f.name: f.default for f in dataclasses.fields(cls)}
    values = {}
    for key, raw in parser.items(section):
        if key not in defaults:
            raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
        try:
            values[key] = _coerce(raw, defaults[key])
        except ValueError as exc:
            raise ConfigError(f"{path}: bad value for {key!r} in [{section}]: {exc}") from exc
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: invalid [{section}] config: {exc}") from exc
