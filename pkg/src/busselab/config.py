"""Run configuration: a flat INI grammar with sections, full-default
fallback, schema validation and round-trippable echo.

Grammar: ``[section]`` headers with ``key = value`` lines (configparser
syntax, ``#``/``;`` comments).  Every key is optional; an empty file yields
the full default configuration (d=500, m=0.45, L=250, ell=50, ...).
Unknown sections or keys, type mismatches and constraint violations are all
collected and reported together.

List values are comma-separated; ranges may be written ``start:stop:step``
(inclusive endpoints up to rounding).
"""

from __future__ import annotations

import configparser
import io
import os
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from busselab.analysis import AnalysisConfig
from busselab.model import DEFAULT_D, DEFAULT_L, DEFAULT_M, DEFAULT_N, Grid1D, ModelParams

__all__ = ["RunConfig", "ConfigError", "load_config", "loads_config", "save_config", "preset", "PRESET_NAMES"]

EXPERIMENTS = (
    "simulate",
    "pattern",
    "dispersion",
    "exit-map",
    "exit-sigma",
    "stationary",
    "from-uniform",
    "gap-fill",
    "validate-noise",
)

# (type, default) per section/key.  Types: float, int, bool, str,
# float_list, int_list, opt_int.
SCHEMA: dict[str, dict[str, tuple[str, Any]]] = {
    "model": {
        "a": ("float", 2.0),
        "m": ("float", DEFAULT_M),
        "d": ("float", DEFAULT_D),
        "sigma": ("float", 0.2),
    },
    "grid": {
        "l": ("float", DEFAULT_L),
        "n": ("int", DEFAULT_N),
    },
    "noise": {
        "xi": ("float", 0.1),
    },
    "schedule": {
        "dt": ("float", 0.05),
        "t_end": ("float", 500.0),
        "observe_stride": ("float", 4.0),
    },
    "analysis": {
        "ell": ("float", 50.0),
        "k_min": ("int", 1),
        "k_max": ("opt_int", None),
        "smooth_window": ("int", 64),
        "prominence": ("float", 0.3),
        "median_window": ("int", 5),
    },
    "run": {
        "experiment": ("str", "simulate"),
        "base_seed": ("int", 12345),
        "out": ("str", "runs/out"),
        "threads": ("int", 0),  # 0 = BUSSE_LAB_THREADS or cpu count
    },
    "simulate": {
        "init": ("str", "pattern:30"),
        "snapshots": ("bool", True),
        "spacetime_csv": ("bool", True),
    },
    "exit-map": {
        "a_values": ("float_list", (2.0,)),
        "k_values": ("int_list", (23, 30, 31, 38)),
        "iterations": ("int", 25),
        "t_max": ("float", 500.0),
    },
    "exit-sigma": {
        "k": ("int", 30),
        "sigma_values": ("float_list", (0.2, 0.25, 0.3, 0.35)),
        "iterations": ("int", 25),
        "t_max": ("float", 2000.0),
    },
    "stationary": {
        "init_specs": ("str", "pattern:19,homogeneous"),
        "iterations": ("int", 10),
        "t_max": ("float", 2500.0),
        "hist_stride": ("float", 25.0),
        "center_stride": ("int", 4),
    },
    "from-uniform": {
        "a_values": ("float_list", (2.0,)),
        "runs": ("int", 20),
        "t_end": ("float", 2000.0),
        "band_csv": ("bool", True),
    },
    "gap-fill": {
        "n": ("int", 30),
        "t_end": ("float", 2000.0),
        "center_stride": ("int", 4),
        "snapshots": ("bool", False),
    },
    "pattern": {
        "n": ("int", 30),
    },
    "dispersion": {
        "bracket_lo": ("float", 1.0),
        "bracket_hi": ("float", 5.0),
    },
    "validate-noise": {
        "samples": ("int", 20000),
    },
}


class ConfigError(ValueError):
    """Invalid configuration; message lists every problem found."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))


@dataclass(frozen=True)
class RunConfig:
    """Validated, fully resolved run configuration."""

    params: ModelParams
    grid: Grid1D
    xi: float
    dt: float
    t_end: float
    observe_stride: float
    analysis: AnalysisConfig
    experiment: str
    base_seed: int
    out: str
    threads: int
    opts: dict = field(default_factory=dict)  # experiment-section values

    def section(self, name: str) -> dict:
        return self.opts.get(name, {})


def _parse_scalar(kind: str, raw: str, where: str, problems: list[str]):
    raw = raw.strip()
    try:
        if kind == "float":
            return float(raw)
        if kind == "int":
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        if kind == "opt_int":
            return None if raw == "" else int(raw)
        if kind == "bool":
            lowered = raw.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if kind == "str":
            return raw
        if kind in ("float_list", "int_list"):
            cast = float if kind == "float_list" else int
            if ":" in raw:
                start, stop, step = (float(part) for part in raw.split(":"))
                count = int(np.floor((stop - start) / step + 1e-9)) + 1
                return tuple(cast(round(start + i * step, 12)) for i in range(count))
            return tuple(cast(part.strip()) for part in raw.split(",") if part.strip())
    except (ValueError, TypeError):
        problems.append(f"{where}: cannot parse {raw!r} as {kind}")
        return None
    raise AssertionError(f"unknown schema kind {kind}")


def _read_parser(parser: configparser.ConfigParser) -> RunConfig:
    problems: list[str] = []
    values: dict[str, dict[str, Any]] = {
        section: {key: default for key, (_, default) in keys.items()}
        for section, keys in SCHEMA.items()
    }
    for section in parser.sections():
        key_schema = SCHEMA.get(section)
        if key_schema is None:
            problems.append(f"unknown section [{section}]")
            continue
        for key, raw in parser.items(section):
            if key not in key_schema:
                problems.append(f"unknown key {key!r} in [{section}]")
                continue
            kind, _ = key_schema[key]
            parsed = _parse_scalar(kind, raw, f"[{section}] {key}", problems)
            if parsed is not None or kind == "opt_int":
                values[section][key] = parsed

    def build(label, ctor, *args, **kwargs):
        try:
            return ctor(*args, **kwargs)
        except (ValueError, TypeError) as err:
            problems.append(f"{label}: {err}")
            return None

    params = build(
        "[model]",
        ModelParams,
        a=values["model"]["a"],
        m=values["model"]["m"],
        d=values["model"]["d"],
        sigma=values["model"]["sigma"],
    )
    grid = build("[grid]", Grid1D, L=values["grid"]["l"], N=values["grid"]["n"])
    analysis = build("[analysis]", AnalysisConfig, **values["analysis"])
    if values["noise"]["xi"] is not None and values["noise"]["xi"] <= 0:
        problems.append(f"[noise] xi: must be positive, got {values['noise']['xi']}")
    if values["run"]["experiment"] not in EXPERIMENTS:
        problems.append(
            f"[run] experiment: {values['run']['experiment']!r} not one of {', '.join(EXPERIMENTS)}"
        )
    sched = values["schedule"]
    if sched["dt"] is not None and sched["dt"] <= 0:
        problems.append(f"[schedule] dt: must be positive, got {sched['dt']}")
    if problems:
        raise ConfigError(problems)
    opts = {name: dict(values[name]) for name in EXPERIMENTS if name in values}
    return RunConfig(
        params=params,
        grid=grid,
        xi=values["noise"]["xi"],
        dt=sched["dt"],
        t_end=sched["t_end"],
        observe_stride=sched["observe_stride"],
        analysis=analysis,
        experiment=values["run"]["experiment"],
        base_seed=values["run"]["base_seed"],
        out=values["run"]["out"],
        threads=values["run"]["threads"],
        opts=opts,
    )


def loads_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as err:
        raise ConfigError([f"parse error: {err}"]) from err
    return _read_parser(parser)


def load_config(path: str) -> RunConfig:
    with open(path) as fh:
        return loads_config(fh.read())


def _format_value(kind: str, value) -> str:
    if kind in ("float_list", "int_list"):
        return ",".join(repr(v) if kind == "float_list" else str(v) for v in value)
    if kind == "opt_int":
        return "" if value is None else str(value)
    if kind == "bool":
        return "1" if value else "0"
    if kind == "float":
        return repr(float(value))
    return str(value)


def save_config(cfg: RunConfig, path: str) -> None:
    """Echo the effective configuration; reloading reproduces ``cfg``."""
    current = {
        "model": {"a": cfg.params.a, "m": cfg.params.m, "d": cfg.params.d, "sigma": cfg.params.sigma},
        "grid": {"l": cfg.grid.L, "n": cfg.grid.N},
        "noise": {"xi": cfg.xi},
        "schedule": {"dt": cfg.dt, "t_end": cfg.t_end, "observe_stride": cfg.observe_stride},
        "analysis": {
            "ell": cfg.analysis.ell,
            "k_min": cfg.analysis.k_min,
            "k_max": cfg.analysis.k_max,
            "smooth_window": cfg.analysis.smooth_window,
            "prominence": cfg.analysis.prominence,
            "median_window": cfg.analysis.median_window,
        },
        "run": {
            "experiment": cfg.experiment,
            "base_seed": cfg.base_seed,
            "out": cfg.out,
            "threads": cfg.threads,
        },
    }
    for name, section in cfg.opts.items():
        current[name] = dict(section)
    out = io.StringIO()
    for section, keys in current.items():
        out.write(f"[{section}]\n")
        for key, value in keys.items():
            kind, _ = SCHEMA[section][key]
            out.write(f"{key} = {_format_value(kind, value)}\n")
        out.write("\n")
    with open(path, "w") as fh:
        fh.write(out.getvalue())


def _with_overrides(text: str) -> RunConfig:
    return loads_config(text)


PRESETS = {
    # Desk-scale runs sized for the acceptance suite.
    "desk-exit-map": """
[run]
experiment = exit-map
[model]
sigma = 0.2
[exit-map]
a_values = 2.0
k_values = 23,30,31,38
iterations = 25
t_max = 500
""",
    "desk-exit-sigma": """
[run]
experiment = exit-sigma
[model]
a = 2.0
[schedule]
dt = 0.025
[exit-sigma]
k = 30
sigma_values = 0.2,0.25,0.3,0.35
iterations = 25
t_max = 4000
""",
    "desk-stationary": """
[run]
experiment = stationary
[model]
a = 1.5
sigma = 0.25
[schedule]
dt = 0.025
[stationary]
init_specs = pattern:19,homogeneous
iterations = 10
t_max = 2500
hist_stride = 25
""",
    "desk-from-uniform": """
[run]
experiment = from-uniform
[model]
sigma = 0.0
[from-uniform]
a_values = 2.0
runs = 20
t_end = 2000
""",
    "desk-gap-fill": """
[run]
experiment = gap-fill
[model]
a = 1.5
sigma = 0.0
[gap-fill]
n = 30
t_end = 2000
""",
    # Paper-scale parameter sets (hours of compute; not exercised by tests).
    "paper-fig1": """
[run]
experiment = from-uniform
[model]
sigma = 0.0
[from-uniform]
a_values = 0.95:3.2:0.05
runs = 200
t_end = 5000
""",
    "paper-fig5a": """
[run]
experiment = exit-map
[model]
sigma = 0.2
[exit-map]
a_values = 0.4:2.6:0.05
k_values = 10:60:1
iterations = 25
t_max = 10000
""",
    "paper-fig8": """
[run]
experiment = stationary
[model]
a = 1.5
sigma = 0.25
[stationary]
init_specs = homogeneous
iterations = 100
t_max = 2500
""",
}

PRESET_NAMES = tuple(sorted(PRESETS))


def preset(name: str) -> RunConfig:
    """A named preset configuration."""
    if name not in PRESETS:
        raise ConfigError([f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}"])
    return loads_config(PRESETS[name])


def default_threads() -> int:
    env = os.environ.get("BUSSE_LAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1
