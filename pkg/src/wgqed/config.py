"""Experiment configuration files (YAML) and their dataclass form."""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from wgqed.dicke_core import DRIVE_MODES, CouplingParams
from wgqed.system import LOW_POWER_RABI, EmitterPairConfig, pair_config

COMMANDS = ("spectrum", "g2", "populations", "coupling-map")


class ConfigError(ValueError):
    """Invalid experiment configuration; ``path`` names the offending field."""

    def __init__(self, msg: str, path: str = "", line: int | None = None):
        where = path or "<root>"
        if line is not None:
            where += f" (line {line})"
        super().__init__(f"{where}: {msg}")
        self.path, self.line = path, line


@dataclass(frozen=True)
class Grid:
    start: float
    stop: float
    num: int
    spacing: str = "linear"

    def __post_init__(self):
        if self.num < 1:
            raise ValueError("grid needs at least one point")
        if self.spacing not in ("linear", "log"):
            raise ValueError(f"spacing must be linear or log, got {self.spacing!r}")
        if self.spacing == "log" and (self.start <= 0 or self.stop <= 0):
            raise ValueError("log grid needs positive bounds")

    def points(self) -> np.ndarray:
        if self.num == 1:
            return np.array([float(self.start)])
        if self.spacing == "log":
            return np.logspace(math.log10(self.start), math.log10(self.stop), self.num)
        return np.linspace(self.start, self.stop, self.num)


@dataclass(frozen=True)
class SystemSpec:
    """Physical parameters; scalar entries apply to both emitters."""

    separation_phase: float = 2 * math.pi
    beta: float | tuple[float, float] = 1.0
    gamma_deph: float | tuple[float, float] = 0.0
    gamma0: float | tuple[float, float] = 1.0
    rabi: float = LOW_POWER_RABI
    detuning: float = 0.0
    mode: str = "RT"
    relative_phase: float | None = None
    driven: tuple[bool, bool] = (True, True)
    lambda_wg: float = 1.0
    j12: float | None = None
    gamma12: float | None = None

    def build(self, **overrides) -> EmitterPairConfig:
        s = replace(self, **overrides)
        coupling = None
        if s.j12 is not None or s.gamma12 is not None:
            coupling = CouplingParams(s.j12 or 0.0, s.gamma12 or 0.0)
        return pair_config(s.separation_phase, beta=s.beta, gamma_deph=s.gamma_deph,
                           gamma0=s.gamma0, rabi=s.rabi, detuning=s.detuning, mode=s.mode,
                           relative_phase=s.relative_phase, driven=s.driven,
                           lambda_wg=s.lambda_wg, coupling=coupling)


SWEEPABLE = tuple(f.name for f in fields(SystemSpec) if f.name not in ("mode", "driven"))


@dataclass(frozen=True)
class SweepAxis:
    name: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class OutputSpec:
    modes: tuple[str, ...] = ()
    detunings: Grid = Grid(-6.0, 6.0, 801)
    refine_levels: int = 3
    subradiant_feature: bool = False
    taus: Grid = Grid(1e-2, 1e3, 400, "log")
    include_zero_delay: bool = True
    fit_risetime: bool = False
    times: Grid = Grid(0.0, 200.0, 401)
    steady_only: bool = False
    field_file: str | None = None
    positions: Mapping[int, tuple[float, float]] = field(default_factory=dict)
    local_rates: Mapping[int, float] = field(default_factory=dict)


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    command: str
    system: SystemSpec = SystemSpec()
    sweep: tuple[SweepAxis, ...] = ()
    outputs: OutputSpec = OutputSpec()
    figure: str = ""
    deterministic: bool = True  # no stochastic components anywhere

    def points(self) -> list[dict[str, float]]:
        """Cartesian product of the sweep axes, first axis slowest."""
        if not self.sweep:
            return [{}]
        names = [a.name for a in self.sweep]
        return [dict(zip(names, combo)) for combo in itertools.product(*(a.values for a in self.sweep))]

    def modes(self) -> tuple[str, ...]:
        return self.outputs.modes or (self.system.mode,)


# --- parsing ---------------------------------------------------------------

def _line_index(node, prefix="") -> dict[str, int]:
    """Map dotted key paths to 1-based source lines from a composed YAML node."""
    out: dict[str, int] = {}
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = f"{prefix}.{k.value}" if prefix else str(k.value)
            out[path] = k.start_mark.line + 1
            out.update(_line_index(v, path))
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            path = f"{prefix}[{i}]"
            out[path] = v.start_mark.line + 1
            out.update(_line_index(v, path))
    return out


class _Reader:
    def __init__(self, lines: dict[str, int]):
        self.lines = lines

    def fail(self, path: str, msg: str):
        # absent fields report the line of their nearest enclosing section
        line, parent = self.lines.get(path), path
        while line is None and parent:
            parent = parent.rpartition(".")[0]
            line = self.lines.get(parent)
        raise ConfigError(msg, path, line)

    def mapping(self, raw, path: str, allowed) -> dict:
        if raw is None:
            return {}
        if not isinstance(raw, dict):
            self.fail(path, "expected a mapping")
        for k in raw:
            if k not in allowed:
                self.fail(f"{path}.{k}" if path else str(k),
                          f"unknown field {k!r}; expected one of {sorted(allowed)}")
        return raw

    def number(self, raw, path: str, *, lo=None, allow_none=False):
        if raw is None and allow_none:
            return None
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            self.fail(path, f"expected a number, got {raw!r}")
        v = float(raw)
        if not math.isfinite(v):
            self.fail(path, "must be finite")
        if lo is not None and v < lo:
            self.fail(path, f"must be >= {lo}, got {v}")
        return v

    def scalar_or_pair(self, raw, path, **kw):
        if isinstance(raw, list):
            if len(raw) != 2:
                self.fail(path, "expected a scalar or a pair")
            return tuple(self.number(r, f"{path}[{i}]", **kw) for i, r in enumerate(raw))
        return self.number(raw, path, **kw)

    def grid(self, raw, path, default: Grid) -> Grid:
        if raw is None:
            return default
        d = self.mapping(raw, path, {"start", "stop", "num", "spacing"})
        try:
            num = d.get("num", default.num)
            if isinstance(num, bool) or not isinstance(num, int):
                self.fail(f"{path}.num", f"expected an integer, got {num!r}")
            return Grid(self.number(d.get("start", default.start), f"{path}.start"),
                        self.number(d.get("stop", default.stop), f"{path}.stop"),
                        num, d.get("spacing", default.spacing))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            self.fail(path, str(exc))


def _parse_system(r: _Reader, raw) -> SystemSpec:
    d = r.mapping(raw, "system", {f.name for f in fields(SystemSpec)})
    kw: dict[str, Any] = {}
    for key in ("separation_phase", "detuning", "relative_phase", "j12", "gamma12"):
        if key in d:
            kw[key] = r.number(d[key], f"system.{key}", allow_none=True)
    for key, lo in (("beta", 0.0), ("gamma_deph", 0.0), ("gamma0", 0.0)):
        if key in d:
            kw[key] = r.scalar_or_pair(d[key], f"system.{key}", lo=lo)
    for key in ("rabi", "lambda_wg"):
        if key in d:
            kw[key] = r.number(d[key], f"system.{key}", lo=0.0)
    if "mode" in d:
        if d["mode"] not in DRIVE_MODES:
            r.fail("system.mode", f"expected one of {DRIVE_MODES}, got {d['mode']!r}")
        kw["mode"] = d["mode"]
    if "driven" in d:
        v = d["driven"]
        if not (isinstance(v, list) and len(v) == 2 and all(isinstance(b, bool) for b in v)):
            r.fail("system.driven", "expected a pair of booleans")
        kw["driven"] = tuple(v)
    spec = SystemSpec(**kw)
    try:
        spec.build()
    except ValueError as exc:
        r.fail("system", str(exc))
    return spec


def _parse_sweep(r: _Reader, raw) -> tuple[SweepAxis, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        r.fail("sweep", "expected a list of axes")
    axes = []
    for i, ax in enumerate(raw):
        path = f"sweep[{i}]"
        d = r.mapping(ax, path, {"name", "values", "start", "stop", "num", "spacing"})
        name = d.get("name")
        if name not in SWEEPABLE:
            r.fail(f"{path}.name", f"unknown sweep parameter {name!r}; expected one of {SWEEPABLE}")
        if "values" in d:
            if not isinstance(d["values"], list) or not d["values"]:
                r.fail(f"{path}.values", "range must be a non-empty list")
            vals = tuple(r.number(v, f"{path}.values[{j}]") for j, v in enumerate(d["values"]))
        else:
            g = r.grid({k: d[k] for k in ("start", "stop", "num", "spacing") if k in d}, path,
                       Grid(0.0, 0.0, 1))
            vals = tuple(float(v) for v in g.points())
        if name in (a.name for a in axes):
            r.fail(f"{path}.name", f"parameter {name!r} swept twice")
        axes.append(SweepAxis(name, vals))
    return tuple(axes)


def _parse_outputs(r: _Reader, raw, command: str) -> OutputSpec:
    allowed = {f.name for f in fields(OutputSpec)}
    d = r.mapping(raw, "outputs", allowed)
    base = OutputSpec()
    kw: dict[str, Any] = {}
    if "modes" in d:
        modes = d["modes"]
        if not isinstance(modes, list) or any(m not in DRIVE_MODES for m in modes):
            r.fail("outputs.modes", f"expected a list drawn from {DRIVE_MODES}")
        kw["modes"] = tuple(modes)
    for key in ("detunings", "taus", "times"):
        if key in d:
            kw[key] = r.grid(d[key], f"outputs.{key}", getattr(base, key))
    for key in ("subradiant_feature", "include_zero_delay", "fit_risetime", "steady_only"):
        if key in d:
            if not isinstance(d[key], bool):
                r.fail(f"outputs.{key}", "expected true/false")
            kw[key] = d[key]
    if "refine_levels" in d:
        v = d["refine_levels"]
        if isinstance(v, bool) or not isinstance(v, int) or v < 0:
            r.fail("outputs.refine_levels", "expected a non-negative integer")
        kw["refine_levels"] = v
    if d.get("field_file") is not None:
        if not isinstance(d["field_file"], str):
            r.fail("outputs.field_file", "expected a path")
        kw["field_file"] = d["field_file"]
    if "positions" in d:
        pos = r.mapping(d["positions"], "outputs.positions", d["positions"] or {})
        out = {}
        for k, v in pos.items():
            if not isinstance(k, int) or not (isinstance(v, list) and len(v) == 2):
                r.fail(f"outputs.positions.{k}", "expected  <index>: [x, y]")
            out[k] = tuple(r.number(c, f"outputs.positions.{k}") for c in v)
        kw["positions"] = out
    if "local_rates" in d:
        rates = r.mapping(d["local_rates"], "outputs.local_rates", d["local_rates"] or {})
        kw["local_rates"] = {k: r.number(v, f"outputs.local_rates.{k}") for k, v in rates.items()}
    spec = OutputSpec(**kw)
    if command == "coupling-map":
        if not spec.field_file:
            r.fail("outputs.field_file", "coupling-map needs a field file")
        if not spec.positions:
            r.fail("outputs.positions", "coupling-map needs at least one emitter-2 position")
    return spec


def config_from_dict(raw: Mapping, lines: dict[str, int] | None = None) -> ExperimentConfig:
    r = _Reader(lines or {})
    d = r.mapping(dict(raw), "", {"name", "command", "figure", "system", "sweep", "outputs",
                                  "deterministic"})
    name = d.get("name", "experiment")
    if not isinstance(name, str) or not name:
        r.fail("name", "expected a non-empty string")
    command = d.get("command")
    if command not in COMMANDS:
        r.fail("command", f"expected one of {COMMANDS}, got {command!r}")
    if d.get("deterministic", True) is not True:
        r.fail("deterministic", "runs are always deterministic; this flag cannot be false")
    system = _parse_system(r, d.get("system"))
    sweep = _parse_sweep(r, d.get("sweep"))
    outputs = _parse_outputs(r, d.get("outputs"), command)
    cfg = ExperimentConfig(name, command, system, sweep, outputs, str(d.get("figure", "")))
    for i, point in enumerate(cfg.points()):
        try:
            system.build(**point)
        except ValueError as exc:
            r.fail("sweep", f"point {i} {point}: {exc}")
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        node = yaml.compose(text)
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"not valid YAML: {getattr(exc, 'problem', exc)}", str(path),
                          mark.line + 1 if mark else None) from exc
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping", str(path))
    return config_from_dict(raw, _line_index(node))


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    return v


def config_to_dict(cfg: ExperimentConfig) -> dict:
    system = {k: _plain(v) for k, v in asdict(cfg.system).items()}
    out = asdict(cfg.outputs)
    outputs = {k: _plain(v) for k, v in out.items()}
    return {
        "name": cfg.name,
        "command": cfg.command,
        "figure": cfg.figure,
        "system": system,
        "sweep": [{"name": a.name, "values": list(a.values)} for a in cfg.sweep],
        "outputs": outputs,
    }


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)


def save_config(cfg: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.write_text(dump_config(cfg), encoding="utf-8")
    return path
