"""
Experiment configuration files.

Format: ``key = value`` lines grouped in ``[sections]``, starting with a
``schema = 1`` line before any section. Lists are comma separated.

    schema = 1
    seed = 7

    [manifold]
    kind = euclidean
    dim = 2

    [grid]
    resolution = 512
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from . import model

SCHEMA_VERSION = 1
MIN_RESOLUTION = 16
_ROOT = "__top__"
_KEY_RE = re.compile(r"^\s*([^=:\s\[][^=:]*?)\s*[=:]")
_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")


class ConfigError(ValueError):
    """Malformed or invalid configuration; ``line`` is 1-based when known."""

    def __init__(self, message, line=None, source="<config>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}: " if line else f"{source}: "
        super().__init__(where + message)


def _line_map(text):
    lines, section = {}, _ROOT
    for n, raw in enumerate(text.splitlines(), start=1):
        m = _SECTION_RE.match(raw)
        if m:
            section = m.group(1).strip()
            lines.setdefault((section, None), n)
            continue
        m = _KEY_RE.match(raw)
        if m and not raw.lstrip().startswith(("#", ";")):
            lines.setdefault((section, m.group(1).strip().lower()), n)
    return lines


@dataclass
class ExperimentConfig:
    sections: dict
    lines: dict
    source: str = "<config>"
    seed: int = 0
    resolution: int | None = None
    out: str | None = None
    manifold: object = None
    extras: dict = field(default_factory=dict)

    def line(self, section, key=None):
        return self.lines.get((section, key)) or self.lines.get((section, None))

    def error(self, section, key, message):
        return ConfigError(message, self.line(section, key), self.source)

    def has(self, section, key=None):
        if key is None:
            return section in self.sections
        return key in self.sections.get(section, {})

    def get(self, section, key, default=None, kind=str):
        try:
            raw = self.sections[section][key]
        except KeyError:
            if default is not None:
                return default
            raise self.error(section, key, f"missing key {key!r} in [{section}]") from None
        try:
            return kind(raw)
        except (TypeError, ValueError):
            raise self.error(section, key, f"cannot read {key} = {raw!r} as {kind.__name__}") from None

    def number(self, section, key, default=None):
        return self.get(section, key, default, _float)

    def integer(self, section, key, default=None):
        return self.get(section, key, default, int)

    def numbers(self, section, key, default=None, ordered=True, positive=True):
        vals = self.get(section, key, default, _float_list)
        if positive and any(not v > 0 for v in vals):
            raise self.error(section, key, f"{key} must be positive")
        if ordered and any(b <= a for a, b in zip(vals, vals[1:])):
            raise self.error(section, key, f"{key} must be strictly increasing")
        return vals

    def grid_resolution(self, section, default):
        """Per-section resolution, overridden by --resolution and [grid]."""
        if self.resolution is not None:
            return self.resolution
        if self.has(section, "resolution"):
            n = self.integer(section, "resolution")
        else:
            n = self.integer("grid", "resolution", default)
        return n

    def to_record(self):
        return {"source": self.source, "seed": self.seed, "resolution_override": self.resolution,
                "sections": self.sections}


def _float(s):
    s = str(s).strip().lower()
    if s in ("inf", "infinity", "+inf"):
        return math.inf
    return float(s)


def _float_list(s):
    if isinstance(s, (list, tuple)):
        return [float(v) for v in s]
    parts = [p for p in re.split(r"[,\s]+", str(s).strip()) if p]
    if not parts:
        raise ValueError("empty list")
    return [_float(p) for p in parts]


def build_manifold(cfg, section="manifold"):
    if not cfg.has(section):
        raise ConfigError(f"missing [{section}] section", None, cfg.source)
    kind = cfg.get(section, "kind").strip().lower()
    dim = cfg.integer(section, "dim", 2)
    r_max = cfg.number(section, "r_max", math.inf)
    try:
        if kind == "euclidean":
            return model.euclidean(dim, r_max)
        if kind == "hyperbolic":
            return model.hyperbolic(dim, cfg.number(section, "k", 1.0), r_max)
        if kind == "cylinder":
            return model.cylinder(dim, cfg.number(section, "r0", 1.0), r_max)
        if kind == "polynomial":
            coeffs = cfg.numbers(section, "coeffs", ordered=False, positive=False)
            return model.polynomial(coeffs, dim, r_max)
    except model.DomainError as exc:
        raise cfg.error(section, "kind", str(exc)) from None
    raise cfg.error(section, "kind", f"unknown manifold kind {kind!r}")


def parse_config(text, source="<config>"):
    """Parse config text; raises ConfigError with a line number on failure."""
    if not text.strip():
        raise ConfigError("empty configuration", None, source)
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                       default_section="__defaults__")
    try:
        parser.read_string(f"[{_ROOT}]\n" + text, source=source)
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno - 1 if exc.lineno else None,
                          source) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]",
                          exc.lineno - 1 if exc.lineno else None, source) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("missing section header", exc.lineno - 1, source) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] - 1 if exc.errors else None
        raise ConfigError("cannot parse line (expected key = value or [section])", lineno,
                          source) from None
    sections = {s: dict(parser.items(s)) for s in parser.sections()}
    lines = _line_map(text)
    top = sections.pop(_ROOT, {})
    if "schema" not in top:
        raise ConfigError(f"missing 'schema = {SCHEMA_VERSION}' header line", 1, source)
    if top["schema"].strip() != str(SCHEMA_VERSION):
        raise ConfigError(f"unsupported schema {top['schema']!r}; expected {SCHEMA_VERSION}",
                          lines.get((_ROOT, "schema")), source)
    cfg = ExperimentConfig(sections, lines, source)
    cfg.sections[_ROOT] = top
    try:
        cfg.seed = int(top.get("seed", 0))
    except ValueError:
        raise ConfigError(f"seed must be an integer, got {top['seed']!r}",
                          lines.get((_ROOT, "seed")), source) from None
    if cfg.seed < 0 or cfg.seed >= 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer", lines.get((_ROOT, "seed")), source)
    cfg.out = top.get("out")
    if "manifold" in sections:
        cfg.manifold = build_manifold(cfg)
    if cfg.has("grid", "resolution"):
        validate_resolution(cfg.integer("grid", "resolution"), cfg, "grid")
    return cfg


def validate_resolution(n, cfg=None, section=None):
    if n < MIN_RESOLUTION:
        msg = f"resolution must be at least {MIN_RESOLUTION} cells, got {n}"
        if cfg is not None:
            raise cfg.error(section, "resolution", msg)
        raise ConfigError(msg)
    return n


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse_config(text, str(path))
