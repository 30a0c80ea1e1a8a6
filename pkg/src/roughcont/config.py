"""Experiment configuration files.

A config is an INI file with a fixed, versioned schema::

    [meta]
    schema = 1
    kind = simulate
    seed = 0

    [grid]
    d = 1
    n = 256
    ratio = 0.2

Every section and key is listed in :data:`SCHEMA` with its type and default;
unknown sections or keys are rejected so typos fail loudly.  List values are
comma separated; ``a..b`` expands to the integers ``a`` to ``b``.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

SCHEMA_VERSION = 1

KINDS = ("simulate", "seminorm", "commutator", "convergence", "besov-check",
         "regularity-envelope", "calibrate")


class ConfigError(ValueError):
    pass


def _bool(s):
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _ints(s):
    out = []
    for part in str(s).split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def _floats(s):
    return tuple(float(p) for p in str(s).split(",") if p.strip())


def _strs(s):
    return tuple(p.strip() for p in str(s).split(",") if p.strip())


# section -> key -> (parser, default)
SCHEMA = {
    "meta": {
        "schema": (int, SCHEMA_VERSION),
        "kind": (str, None),
        "name": (str, ""),
        "seed": (int, 0),
    },
    "grid": {
        "d": (int, 1),
        "n": (int, 256),
        "ratio": (float, 0.25),
    },
    "scheme": {
        "name": (str, "upwind"),
        "cfl": (float, 0.5),
        "nu": (float, 0.25),
        "control": (str, "centered"),
    },
    "flux": {
        "kind": (str, "linear"),
        "uc": (float, 1.0),
        "u_min": (float, 0.0),
        "u_max": (float, 1.0),
    },
    "field": {
        "beta": (float, 1.5),
        "divfree": (_bool, False),
        "amplitude": (float, 0.5),
        "mean": (float, 1.0),
        "normalize": (str, "max"),
        "n_ref": (int, 0),
        "file": (str, ""),
    },
    "initial": {
        "kind": (str, "bump"),
        "centre": (float, 0.5),
        "width": (float, 0.1),
        "height": (float, 1.0),
        "base": (float, 0.0),
        "uL": (float, 0.5),
        "uR": (float, 0.0),
        "x0": (float, 0.25),
        "x1": (float, 0.75),
        "file": (str, ""),
    },
    "ladder": {
        "alpha": (float, 0.5),
        "theta": (float, 0.5),
        "p": (float, 1.0),
        "q": (float, 2.0),
        "exponents": (_ints, ()),
    },
    "run": {
        "suite": (str, ""),
        "T": (float, 0.5),
        "steps": (int, 100),
        "configs": (int, 10),
        "fields": (int, 10),
        "refinements": (_ints, ()),
        "sizes": (_ints, ()),
        "families": (_strs, ()),
        "tolerance": (float, 1e-12),
        "threshold": (float, math.nan),
        "control_threshold": (float, math.nan),
        "safety": (float, 2.0),
        "calibration_seed": (int, 1000),
        "kappas": (_floats, (0.0, 0.25, 0.5)),
    },
    "output": {
        "dir": (str, "out"),
        "format": (str, "csv"),
    },
}

_INSENSITIVE = {s: {k.lower(): k for k in keys} for s, keys in SCHEMA.items()}


@dataclass
class ExperimentConfig:
    """Parsed configuration: ``sections[section][key]`` with defaults filled in."""

    sections: dict = field(default_factory=dict)
    source: str = "<defaults>"

    @property
    def kind(self):
        return self.sections["meta"]["kind"]

    @property
    def seed(self):
        return self.sections["meta"]["seed"]

    def __getitem__(self, section):
        return self.sections[section]

    def get(self, section, key):
        return self.sections[section][key]

    def with_overrides(self, **overrides):
        """Copy with ``section__key=value`` replacements (values already typed)."""
        new = {s: dict(v) for s, v in self.sections.items()}
        for dotted, value in overrides.items():
            sec, key = dotted.split("__", 1)
            if sec not in SCHEMA or key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key [{sec}] {key}")
            new[sec][key] = value
        cfg = ExperimentConfig(new, self.source)
        validate(cfg)
        return cfg

    def to_dict(self):
        return {s: {k: (list(v) if isinstance(v, tuple) else v) for k, v in keys.items()}
                for s, keys in self.sections.items()}

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _defaults():
    return {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}


def parse_config(text, source="<string>"):
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    sections = _defaults()
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{sec}]")
        for raw_key, raw in cp.items(sec):
            key = _INSENSITIVE[sec].get(raw_key)
            if key is None:
                raise ConfigError(f"{source}: unknown key [{sec}] {raw_key}")
            conv = SCHEMA[sec][key][0]
            try:
                sections[sec][key] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"{source}: [{sec}] {key}: {exc}") from None
    cfg = ExperimentConfig(sections, source)
    validate(cfg)
    return cfg


def load_config(path):
    """Read a config file; a bare name such as ``c07_commutator`` resolves to
    the pinned config shipped with the package."""
    p = Path(path)
    if not p.exists() and not p.suffix:
        pinned = resources.files("roughcont") / "configs" / f"{path}.ini"
        if pinned.is_file():
            return parse_config(pinned.read_text(), str(path))
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(p.read_text(), str(p))


def pinned_configs():
    """Names of the shipped configs."""
    root = resources.files("roughcont") / "configs"
    return sorted(f.name[:-4] for f in root.iterdir() if f.name.endswith(".ini"))


def validate(cfg):
    s = cfg.sections
    src = cfg.source
    if s["meta"]["schema"] != SCHEMA_VERSION:
        raise ConfigError(f"{src}: schema version {s['meta']['schema']} not supported (expected {SCHEMA_VERSION})")
    if s["meta"]["kind"] not in KINDS:
        raise ConfigError(f"{src}: kind must be one of {', '.join(KINDS)}; got {s['meta']['kind']!r}")
    g = s["grid"]
    if g["d"] not in (1, 2):
        raise ConfigError(f"{src}: [grid] d must be 1 or 2")
    n = g["n"]
    if n < 2 or n & (n - 1):
        raise ConfigError(f"{src}: [grid] n must be a power of two >= 2")
    if not g["ratio"] > 0:
        raise ConfigError(f"{src}: [grid] ratio must be positive")
    if s["scheme"]["name"] not in ("upwind", "lax-friedrichs", "lf", "centered"):
        raise ConfigError(f"{src}: unknown scheme {s['scheme']['name']!r}")
    if not 0 <= s["scheme"]["nu"] <= 0.25:
        raise ConfigError(f"{src}: [scheme] nu must lie in [0, 1/4]")
    if s["flux"]["kind"] not in ("linear", "burgers", "logistic"):
        raise ConfigError(f"{src}: unknown flux {s['flux']['kind']!r}")
    if s["field"]["normalize"] not in ("rms", "max"):
        raise ConfigError(f"{src}: [field] normalize must be rms or max")
    if not s["field"]["beta"] > 0:
        raise ConfigError(f"{src}: [field] beta must be positive")
    lad = s["ladder"]
    if lad["p"] < 1 or lad["q"] < 1:
        raise ConfigError(f"{src}: [ladder] p and q must be >= 1")
    if not 0 < lad["alpha"] < 1:
        raise ConfigError(f"{src}: [ladder] alpha must lie in (0, 1)")
    if any(k < 1 for k in lad["exponents"]):
        raise ConfigError(f"{src}: [ladder] exponents must be >= 1 (h = 2^-k <= 1/2)")
    for key in ("refinements", "sizes"):
        bad = [m for m in s["run"][key] if m < 1 or m & (m - 1)]
        if bad:
            raise ConfigError(f"{src}: [run] {key} entries must be powers of two, got {bad}")
    if s["run"]["T"] < 0 or s["run"]["steps"] < 0:
        raise ConfigError(f"{src}: [run] T and steps must be non-negative")
    for sec in ("field", "initial"):
        f = s[sec]["file"]
        if f and not Path(f).is_file():
            raise ConfigError(f"{src}: [{sec}] file not found: {f}")
    if s["output"]["format"] not in ("csv", "json", "svg"):
        raise ConfigError(f"{src}: [output] format must be csv, json or svg")
    return cfg
