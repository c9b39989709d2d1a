"""Flat key = value configuration files mirroring PipelineConfig.

The format is a TOML-like subset that needs no parser dependency: one
`key = value` per line, `#` comments, blank lines ignored. Sub-configs
use dotted keys (extraction.threshold = 0.5). Class names are a comma
list. Command-line flags override file values, which override defaults.
"""

from __future__ import annotations

from dataclasses import fields, replace
from pathlib import Path

from .classify import ClassCatalog
from .extraction import ExtractionConfig
from .merging import LinkConfig
from .metrics import ScoringConfig
from .pipeline import PipelineConfig
from .splitting import SplitConfig

_SECTIONS = {
    "extraction": ExtractionConfig,
    "link": LinkConfig,
    "split": SplitConfig,
    "scoring": ScoringConfig,
}
_TOP_INTS = ("clip_length", "clip_stride", "height", "width", "workers")


def parse_config_text(text: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _field_type(field_obj):
    t = field_obj.type
    if not isinstance(t, str):
        t = getattr(t, "__name__", str(t))
    if t.startswith("tuple"):
        return tuple
    return {"int": int, "float": float, "bool": bool, "str": str}.get(t, str)


def _convert(value, target_type):
    if isinstance(value, str):
        if target_type is bool:
            lowered = value.lower()
            if lowered in ("true", "1", "yes"):
                return True
            if lowered in ("false", "0", "no"):
                return False
            raise ValueError(f"expected a boolean, got {value!r}")
        if target_type is int:
            return int(value)
        if target_type is float:
            return float(value)
        if target_type is tuple:  # comma list of floats (operating points)
            return tuple(float(v) for v in value.split(",") if v.strip())
        return value
    if target_type is tuple and not isinstance(value, tuple):
        return tuple(value)
    return value


def config_from_mapping(values: dict, base: PipelineConfig | None = None) -> PipelineConfig:
    """Apply flat (possibly dotted) keys on top of a base config."""
    cfg = base if base is not None else PipelineConfig()
    top: dict = {}
    sections: dict[str, dict] = {name: {} for name in _SECTIONS}
    for key, value in values.items():
        if value is None:
            continue
        if "." in key:
            section, field_name = key.split(".", 1)
            if section not in _SECTIONS:
                raise KeyError(f"unknown config section {section!r}")
            cls = _SECTIONS[section]
            by_name = {f.name: f for f in fields(cls)}
            if field_name not in by_name:
                raise KeyError(f"unknown config key {key!r}")
            sections[section][field_name] = _convert(
                value, _field_type(by_name[field_name])
            )
        elif key in _TOP_INTS:
            top[key] = _convert(value, int)
        elif key == "classes":
            names = (
                tuple(n.strip() for n in value.split(",") if n.strip())
                if isinstance(value, str)
                else tuple(value)
            )
            top["catalog"] = ClassCatalog(names)
        else:
            raise KeyError(f"unknown config key {key!r}")
    for name, updates in sections.items():
        if updates:
            top[name] = replace(getattr(cfg, name), **updates)
    return replace(cfg, **top)


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    """Config file (optional) plus override mapping (optional) -> config."""
    cfg = PipelineConfig()
    if path is not None:
        cfg = config_from_mapping(parse_config_text(Path(path).read_text()), cfg)
    if overrides:
        cfg = config_from_mapping(overrides, cfg)
    return cfg
