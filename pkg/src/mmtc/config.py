"""Flat ``key = value`` configuration files.

Blank lines and ``#`` comments are ignored. Densities accept scientific
notation (``3.1623e-5``); thresholds accept a ``dB`` suffix (``0dB``,
``-3 dB``). Every network parameter is required unless a preset supplies it.
Optional simulation keys: ``n_runs``, ``master_seed``, ``r_bs_sim``,
``r_agg_sim``, ``measurement_radius``, ``scheme``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, fields

from .params import INT_FIELDS, PARAM_FIELDS, NetworkParams, SchedulingScheme, db_to_linear, default_params, desk_params, validate
from .simulator import SimConfig

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config", "format_config", "preset"]

SIM_FIELDS = ("n_runs", "master_seed", "r_bs_sim", "r_agg_sim", "measurement_radius", "scheme")
DB_FIELDS = ("gamma1",)
PRESETS = ("table1", "desk")
_DB = re.compile(r"^\s*([-+]?[0-9.]+(?:[eE][-+]?\d+)?)\s*dB\s*$", re.IGNORECASE)


class ConfigError(ValueError):
    """Invalid or incomplete configuration."""


@dataclass(frozen=True)
class RunConfig:
    params: NetworkParams
    sim: SimConfig


def preset(name: str) -> RunConfig:
    if name == "table1":
        return RunConfig(default_params(), SimConfig.table1())
    if name == "desk":
        return RunConfig(desk_params(), SimConfig.desk())
    raise ConfigError(f"unknown preset {name!r} (expected one of {', '.join(PRESETS)})")


def _number(key: str, raw: str):
    text = raw.strip()
    if key in DB_FIELDS:
        m = _DB.match(text)
        if m:
            return db_to_linear(float(m.group(1)))
    try:
        if key in INT_FIELDS or key in ("n_runs", "master_seed"):
            try:
                return int(text)  # exact for 64-bit seeds
            except ValueError:
                value = float(text)  # accepts "70.0" or "1e4"
            if not value.is_integer():
                raise ValueError
            return int(value)
        value = float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as a number") from None
    if not math.isfinite(value):
        raise ConfigError(f"{key}: value must be finite (got {raw!r})")
    return value


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse config text, filling unspecified keys from ``base`` when given."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in PARAM_FIELDS and key not in SIM_FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = raw if key == "scheme" else _number(key, raw)

    if base is None:
        missing = [k for k in PARAM_FIELDS if k not in values]
        if missing:
            raise ConfigError(f"missing required field(s): {', '.join(missing)}")
        params = NetworkParams(**{k: values[k] for k in PARAM_FIELDS})
        sim = SimConfig()
    else:
        params = base.params.with_(**{k: values[k] for k in PARAM_FIELDS if k in values})
        sim = base.sim
    sim_kw = {k: values[k] for k in SIM_FIELDS if k in values}
    try:
        if "scheme" in sim_kw:
            sim_kw["scheme"] = SchedulingScheme.parse(sim_kw["scheme"])
        sim = sim.with_(**sim_kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    problems = validate(params)
    if problems:
        raise ConfigError("; ".join(problems))
    return RunConfig(params, sim)


def load_config(path=None, preset_name: str | None = None) -> RunConfig:
    """Load ``path`` on top of ``preset_name``; either may be omitted (default: table1)."""
    base = preset(preset_name) if preset_name else None
    if path is None:
        return base if base is not None else preset("table1")
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, base)


def format_config(cfg: RunConfig) -> str:
    """Serialize so that ``parse_config(format_config(c)) == c``."""
    lines = [f"{k} = {getattr(cfg.params, k)!r}" for k in PARAM_FIELDS]
    for f in fields(cfg.sim):
        v = getattr(cfg.sim, f.name)
        lines.append(f"{f.name} = {v.value if isinstance(v, SchedulingScheme) else repr(v)}")
    return "\n".join(lines) + "\n"
