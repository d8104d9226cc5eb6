"""Plain-text experiment configuration: a single YAML file, dotted-path
command-line overrides, and a content hash recorded in every output manifest
so reruns are attributable to an exact configuration."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, is_dataclass
from pathlib import Path

import yaml

from .errors import ConfigError, ParseError


def load_config(path) -> dict:
    """Parse a YAML config file into a plain dict (empty file -> {})."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ParseError(f"{path}: top level must be a mapping")
    return data


def apply_overrides(cfg: dict, overrides) -> dict:
    """Apply ``a.b.c=value`` assignments on top of a config dict.

    Values parse as YAML scalars, so numbers, booleans, and lists come
    through typed.  Intermediate mappings are created as needed.
    """
    out = json.loads(json.dumps(cfg))  # deep copy, plain types only
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        dotted, raw = item.split("=", 1)
        keys = [k for k in dotted.strip().split(".") if k]
        if not keys:
            raise ConfigError(f"override {item!r} has an empty key path")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"override {item!r}: bad value ({exc})") from exc
        node = out
        for k in keys[:-1]:
            nxt = node.get(k)
            if nxt is None:
                nxt = node[k] = {}
            elif not isinstance(nxt, dict):
                raise ConfigError(f"override {item!r} descends through a scalar")
            node = nxt
        node[keys[-1]] = value
    return out


def _canonical(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return _canonical(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, (str, int, float, bool)) or obj is None:
        return obj
    if isinstance(obj, Path):
        return str(obj)
    return repr(obj)


def config_hash(obj) -> str:
    """Stable 16-hex-digit digest of a config (dict or dataclass)."""
    blob = json.dumps(_canonical(obj), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]
