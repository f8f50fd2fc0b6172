"""Run configuration files.

A configuration is a TOML file with the optional sections below; every key
has a default, and command-line flags override file values.

.. code-block:: toml

    [geometry]          # metres
    d = 200e-9
    delta = 265e-9
    t1 = 5e-6
    t3 = 5e-6

    [materials]         # built-in name or an inline table
    material1 = "sic-palik"
    material2 = { kind = "drude", omega_p = 2.5276e14, damping_ratio = 1e-3 }
    material3 = "sic-palik"

    [temperatures]      # kelvin; T2 = number | "balance" | "refine"
    T1 = 400.0
    T2 = "balance"
    T3 = 300.0

    [numerics]          # fields of relayflux.transport.Numerics
    rtol = 1e-6

    [sweep]
    d_min = 50e-9
    d_max = 800e-9
    d_count = 20
    delta_min = 0.0
    delta_max = 1e-6
    delta_count = 20
    max_points = 512

    [output]
    path = "map.csv"

Relative config paths that do not exist in the working directory are looked
up in the directory named by ``RELAYFLUX_CONFIG_DIR``, which also supplies a
default ``relayflux.toml`` when no file is given.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import materials as mat
from .transport import DEFAULT_NUMERICS, Numerics, SystemConfig

CONFIG_DIR_ENV = "RELAYFLUX_CONFIG_DIR"
DEFAULT_CONFIG_NAME = "relayflux.toml"
T2_MODES = ("balance", "refine")


class ConfigError(ValueError):
    """Invalid or unreadable configuration."""


@dataclass(frozen=True)
class SweepSettings:
    d_min: float = 50e-9
    d_max: float = 800e-9
    d_count: int = 20
    delta_min: float = 0.0
    delta_max: float = 1e-6
    delta_count: int = 20
    max_points: int = 512


@dataclass(frozen=True)
class RunConfig:
    """Everything a subcommand needs: physics, numerics, sweep axes and output."""

    system: SystemConfig = field(default_factory=SystemConfig)
    numerics: Numerics = DEFAULT_NUMERICS
    sweep: SweepSettings = field(default_factory=SweepSettings)
    t2_mode: str = "balance"  # "balance", "refine" or "fixed"
    output: Optional[str] = None
    source: Optional[str] = None


_GEOMETRY_KEYS = ("d", "delta", "t1", "t3")
_TEMPERATURE_KEYS = ("T1", "T2", "T3")
_MATERIAL_KEYS = ("material1", "material2", "material3")


def resolve_path(path=None) -> Optional[Path]:
    """Locate a config file, falling back to ``$RELAYFLUX_CONFIG_DIR``."""
    base = os.environ.get(CONFIG_DIR_ENV)
    if path is None:
        if base and (Path(base) / DEFAULT_CONFIG_NAME).is_file():
            return Path(base) / DEFAULT_CONFIG_NAME
        return None
    p = Path(path)
    if p.is_file() or p.is_absolute() or not base:
        return p
    alt = Path(base) / p
    return alt if alt.is_file() else p


def _material(value, key):
    try:
        if isinstance(value, str):
            return mat.get_model(value)
        if isinstance(value, dict):
            return mat.model_from_dict(value)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"materials.{key}: {exc}") from None
    raise ConfigError(f"materials.{key} must be a name or a table")


def _number(section, key, value, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number")
    if integer:
        if int(value) != value:
            raise ConfigError(f"{section}.{key} must be an integer")
        return int(value)
    return float(value)


def _check_keys(section, table, allowed):
    if not isinstance(table, dict):
        raise ConfigError(f"[{section}] must be a table")
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(unknown)}")


def from_mapping(data: dict, base: Optional[RunConfig] = None) -> RunConfig:
    """Apply a parsed TOML mapping on top of ``base`` (defaults if omitted)."""
    run = base or RunConfig()
    unknown = sorted(set(data) - {"geometry", "materials", "temperatures", "numerics", "sweep",
                                  "output"})
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    sys_changes = {}

    geo = data.get("geometry", {})
    _check_keys("geometry", geo, _GEOMETRY_KEYS)
    for k, v in geo.items():
        sys_changes[k] = _number("geometry", k, v)

    mats = data.get("materials", {})
    _check_keys("materials", mats, _MATERIAL_KEYS)
    for k, v in mats.items():
        sys_changes[k] = _material(v, k)

    temps = data.get("temperatures", {})
    _check_keys("temperatures", temps, _TEMPERATURE_KEYS)
    t2_mode = run.t2_mode
    for k, v in temps.items():
        if k == "T2" and isinstance(v, str):
            if v not in T2_MODES:
                raise ConfigError(f"temperatures.T2 must be a number or one of {T2_MODES}")
            t2_mode = v
            sys_changes["T2"] = None
        else:
            sys_changes[k] = _number("temperatures", k, v)
            if k == "T2":
                t2_mode = "fixed"

    num = data.get("numerics", {})
    num_fields = {f.name: f.type for f in fields(Numerics)}
    _check_keys("numerics", num, num_fields)
    numerics = run.numerics
    if num:
        numerics = replace(numerics, **{k: _number("numerics", k, v, integer=(k == "max_iter"))
                                        for k, v in num.items()})

    sw = data.get("sweep", {})
    sw_fields = [f.name for f in fields(SweepSettings)]
    _check_keys("sweep", sw, sw_fields)
    sweep = run.sweep
    if sw:
        sweep = replace(sweep, **{k: _number("sweep", k, v, integer=k.endswith(("count", "points")))
                                  for k, v in sw.items()})

    out = data.get("output", {})
    _check_keys("output", out, ("path",))
    output = out.get("path", run.output)
    if output is not None and not isinstance(output, str):
        raise ConfigError("output.path must be a string")

    try:
        system = replace(run.system, **sys_changes)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    validate_numerics(numerics)
    return replace(run, system=system, numerics=numerics, sweep=sweep, t2_mode=t2_mode,
                   output=output)


def validate_numerics(numerics: Numerics):
    if not 0 < numerics.rtol < 1:
        raise ConfigError("numerics.rtol must lie in (0, 1)")
    for name in ("inner_rtol_ratio", "omega_min_factor", "omega_max_factor", "k_range_factor",
                 "omega_range_factor", "tail_rtol", "k_peak_ratio"):
        if not getattr(numerics, name) > 0:
            raise ConfigError(f"numerics.{name} must be positive")
    if numerics.max_iter < 1:
        raise ConfigError("numerics.max_iter must be at least 1")


def load_config(path=None) -> RunConfig:
    """Read a configuration file (or the default one); missing file -> defaults."""
    resolved = resolve_path(path)
    if resolved is None:
        return RunConfig()
    try:
        with open(resolved, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {resolved}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{resolved}: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read {resolved}: {exc}") from None
    return replace(from_mapping(data), source=str(resolved))
