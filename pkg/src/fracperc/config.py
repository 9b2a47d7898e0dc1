"""Experiment configuration: INI text with ``[model]``, ``[run]`` and
``[task]`` sections.

``[model]``
    ``d``, ``M`` and ``p`` (one value for a homogeneous spec or ``M**d``
    comma-separated values), or ``preset = homogeneous P`` /
    ``preset = carpet P Q``.
``[run]``
    ``depth``, ``depths`` (``a..b`` or a list), ``trials``, ``seed``,
    ``workers``, ``raster`` (``png`` or ``pgm``).
``[task]``
    Free-form keys read by each subcommand.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .model import RetentionSpec, SpecError, carpet, homogeneous, validate_spec

TASKS = ("analyze", "simulate", "project", "check", "slice", "sumset", "render")
# fields that cannot change any output; left out of the echo so artifacts
# stay byte-identical across thread counts
NOT_ECHOED = {("run", "workers")}


class ConfigError(ValueError):
    """Unparseable or out-of-range configuration."""


def parse_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError as exc:
        raise ConfigError(f"not a list of numbers: {text!r}") from exc


def parse_depths(text: str) -> list[int]:
    text = text.strip()
    try:
        if ".." in text:
            a, b = text.split("..")
            return list(range(int(a), int(b) + 1))
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad depth list {text!r}") from exc


@dataclass
class ExperimentConfig:
    spec: RetentionSpec
    depth: int = 4
    depths: list[int] = field(default_factory=list)
    trials: int = 1
    seed: int = 0
    workers: int = 1
    raster: str = "png"
    task: dict[str, str] = field(default_factory=dict)
    raw: dict[str, dict[str, str]] = field(default_factory=dict)

    def echo(self) -> dict[str, str]:
        """Flat, sorted ``section.key -> value`` view of the input."""
        out = {}
        for sec in sorted(self.raw):
            for k in sorted(self.raw[sec]):
                if (sec, k) not in NOT_ECHOED:
                    out[f"{sec}.{k}"] = self.raw[sec][k]
        return out

    def echo_header(self) -> str:
        return "".join(f"# {k}={v}\n" for k, v in self.echo().items())

    def to_ini(self) -> str:
        lines = []
        for sec in sorted(self.raw):
            lines.append(f"[{sec}]")
            lines.extend(f"{k} = {v}" for k, v in sorted(self.raw[sec].items())
                         if (sec, k) not in NOT_ECHOED)
            lines.append("")
        return "\n".join(lines)


def _int(sec: dict, key: str, default: int, lo: int, hi: int | None = None) -> int:
    if key not in sec:
        return default
    try:
        v = int(sec[key])
    except ValueError as exc:
        raise ConfigError(f"{key} must be an integer, got {sec[key]!r}") from exc
    if v < lo or (hi is not None and v > hi):
        raise ConfigError(f"{key}={v} outside [{lo}, {hi if hi is not None else 'inf'}]")
    return v


def resolve_spec(model: dict[str, str]) -> RetentionSpec:
    try:
        if "preset" in model:
            words = model["preset"].split()
            if words[0] == "homogeneous" and len(words) == 2:
                d = _int(model, "d", 2, 1)
                M = _int(model, "M", 3, 2)
                return homogeneous(d, M, float(words[1]))
            if words[0] == "carpet" and len(words) in (2, 3):
                return carpet(*map(float, words[1:]))
            raise ConfigError(f"unknown preset {model['preset']!r}")
        d = _int(model, "d", 2, 1)
        M = _int(model, "M", 3, 2)
        if "p" not in model:
            raise ConfigError("model needs p or preset")
        p = parse_floats(model["p"])
        if len(p) == 1:
            return homogeneous(d, M, p[0])
        return validate_spec(d, M, p)
    except SpecError as exc:
        raise ConfigError(str(exc)) from exc
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def from_sections(raw: dict[str, dict[str, str]]) -> ExperimentConfig:
    model = raw.get("model", {})
    run = raw.get("run", {})
    spec = resolve_spec(model)
    depth = _int(run, "depth", 4, 0, 40)
    depths = parse_depths(run["depths"]) if "depths" in run else []
    if any(n < 0 for n in depths):
        raise ConfigError("depths must be nonnegative")
    raster = run.get("raster", "png")
    if raster not in ("png", "pgm"):
        raise ConfigError(f"raster must be png or pgm, got {raster!r}")
    return ExperimentConfig(spec, depth, depths, _int(run, "trials", 1, 1),
                            _int(run, "seed", 0, 0, 2 ** 64 - 1), _int(run, "workers", 1, 1, 256),
                            raster, dict(raw.get("task", {})), raw)


def load_config(text: str | None, overrides: list[tuple[str, str, str]] = ()) -> ExperimentConfig:
    """Parse INI text (may be ``None``) and apply ``(section, key, value)``
    overrides in order."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    if text:
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
    raw = {sec: dict(cp[sec]) for sec in cp.sections()}
    for sec, key, value in overrides:
        if sec not in ("model", "run", "task"):
            raise ConfigError(f"unknown section {sec!r}")
        raw.setdefault(sec, {})[key] = value
    for sec in raw:
        if sec not in ("model", "run", "task"):
            raise ConfigError(f"unknown section [{sec}]")
    return from_sections(raw)
