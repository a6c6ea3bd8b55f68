"""Workbench configuration: flat ``key = value`` files plus overrides.

Canonical form (what ``dumps`` writes and manifests store) is one
``key = value`` line per field, keys sorted, with ``#`` starting a comment.
Keys may use dashes or underscores.  Every problem found while loading is
collected so a single error lists all of them.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, asdict

from .cloner import OPTICS_PRESETS
from .protocols import PROTOCOLS

COMMANDS = ("analyze", "optimize", "map", "simulate", "source-check", "tomo-demo")
NEEDS_PARAMS = ("analyze", "simulate")


class ConfigError(ValueError):
    """Raised with every validation failure joined into one message."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class WorkbenchConfig:
    command: str
    protocol: str = "bb84"
    p: float | None = None
    lambda2: float | None = None
    optics: str = "measured"
    resolution: int = 201
    grid_step: float = 0.005
    rounds: int = 1_000_000
    sifted: bool = True
    seed: int = 0
    noise: float = 0.0
    purity: float | None = None
    clicks: float = 35_000.0
    window_ns: float = 1.0
    dead_time_ns: float = 35.0
    eta: float = 0.5
    shots: int = 100_000
    output: str | None = None

    def as_dict(self):
        return asdict(self)


_TYPES = {
    "command": str, "protocol": str, "p": float, "lambda2": float, "optics": str,
    "resolution": int, "grid_step": float, "rounds": int, "sifted": _bool, "seed": int,
    "noise": float, "purity": float, "clicks": float, "window_ns": float,
    "dead_time_ns": float, "eta": float, "shots": int, "output": str,
}
FIELDS = tuple(f.name for f in fields(WorkbenchConfig))


def normalize_key(key):
    return key.strip().lower().replace("-", "_")


def parse_text(text, source="<config>"):
    """Parse ``key = value`` lines into a dict of raw strings."""
    values, problems = {}, []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"{source}:{n}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        values[normalize_key(key)] = value
    return values, problems


def _coerce(raw, problems):
    out = {}
    for key, value in raw.items():
        if key not in _TYPES:
            problems.append(f"unknown key {key!r}")
            continue
        if value is None or (isinstance(value, str) and value.lower() in ("", "none")):
            out[key] = None
            continue
        try:
            out[key] = _TYPES[key](value)
        except (TypeError, ValueError):
            problems.append(f"{key}: cannot read {value!r} as {_TYPES[key].__name__.strip('_')}")
    return out


def _check(cfg, problems):
    if cfg.get("command") not in COMMANDS:
        problems.append(f"command must be one of {', '.join(COMMANDS)}, got {cfg.get('command')!r}")
    if str(cfg.get("protocol", "bb84")).lower() not in PROTOCOLS:
        problems.append(f"protocol must be one of {sorted(PROTOCOLS)}, got {cfg.get('protocol')!r}")
    if cfg.get("optics", "measured") not in OPTICS_PRESETS:
        problems.append(f"optics must be one of {sorted(OPTICS_PRESETS)}, got {cfg.get('optics')!r}")
    for key in ("p", "lambda2", "noise", "purity"):
        v = cfg.get(key)
        if v is not None and not 0.0 <= v <= 1.0:
            problems.append(f"{key} must lie in [0, 1], got {v}")
    if cfg.get("command") in NEEDS_PARAMS:
        for key in ("p", "lambda2"):
            if cfg.get(key) is None:
                problems.append(f"{cfg['command']} needs {key}")
    positive = {"resolution": 2, "rounds": 1, "shots": 1}
    for key, low in positive.items():
        v = cfg.get(key)
        if v is not None and v < low:
            problems.append(f"{key} must be at least {low}, got {v}")
    for key in ("grid_step", "window_ns", "dead_time_ns"):
        v = cfg.get(key)
        if v is not None and not v > 0:
            problems.append(f"{key} must be positive, got {v}")
    if cfg.get("grid_step") is not None and cfg["grid_step"] > 0.5:
        problems.append("grid_step must not exceed 0.5")
    eta = cfg.get("eta")
    if eta is not None and not 0 < eta <= 1:
        problems.append(f"eta must lie in (0, 1], got {eta}")
    if cfg.get("clicks") is not None and cfg["clicks"] < 0:
        problems.append("clicks must be non-negative")
    seed = cfg.get("seed")
    if seed is not None and not 0 <= seed < 2**64:
        problems.append("seed must be a 64-bit unsigned integer")
    out = cfg.get("output")
    if out:
        target = os.path.abspath(out)
        parent = target if os.path.isdir(target) else os.path.dirname(target)
        if os.path.exists(target) and not os.path.isdir(target):
            problems.append(f"output {out!r} exists and is not a directory")
        elif not os.path.isdir(parent) or not os.access(parent, os.W_OK):
            problems.append(f"output {out!r} is not writable")


def build_config(command=None, file_text=None, overrides=None, source="<config>"):
    """Merge file values and overrides (overrides win) into a validated config.

    Raises
    ------
    ConfigError
        Listing every problem found.
    """
    problems = []
    raw = {}
    if file_text is not None:
        values, errs = parse_text(file_text, source)
        raw.update(values)
        problems += errs
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[normalize_key(key)] = value
    if command is not None:
        raw["command"] = command
    cfg = _coerce(raw, problems)
    if "protocol" in cfg and cfg["protocol"]:
        cfg["protocol"] = cfg["protocol"].lower()
    _check(cfg, problems)
    if problems:
        raise ConfigError(problems)
    return WorkbenchConfig(**cfg)


def dumps(config, exclude=("output",)):
    """Canonical text form of a config."""
    lines = []
    for key, value in sorted(config.as_dict().items()):
        if key in exclude:
            continue
        lines.append(f"{key} = {'none' if value is None else value!r}".replace("'", ""))
    return "\n".join(lines) + "\n"


def load(path, command=None, overrides=None):
    with open(path) as fh:
        text = fh.read()
    return build_config(command, text, overrides, source=str(path))
