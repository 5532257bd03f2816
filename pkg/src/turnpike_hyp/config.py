"""Experiment configuration: INI files with one section per concern.

Example::

    [run]
    command = solve-dynamic
    seed = 42

    [system]
    L = 1.0
    eta0 = -1.0
    d_plus = 1.0
    d_minus = -1.0
    M = 1 0 0 1

    [cost]
    lambda = 0.5
    R_b = 1 1

    [grid]
    T = 10
    n_x = 100
"""

from __future__ import annotations

import configparser
import dataclasses
import re
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParseError, ValidationError
from .pipeline import PipelineParams

COMMANDS = ("certify", "simulate", "solve-static", "solve-dynamic", "solve-integer", "sweep", "pipeline")

# INI key -> attribute name where Python keywords get in the way
_ALIASES = {"lambda": "lam"}
_KEYS = {v: k for k, v in _ALIASES.items()}


@dataclass(frozen=True)
class SystemSection:
    L: float = 1.0
    eta0: float = 0.0
    d_plus: float = 1.0
    d_minus: float = -1.0
    M: tuple[float, ...] = (1.0, 0.0, 0.0, 1.0)
    table: str = ""


@dataclass(frozen=True)
class CostSection:
    lam: float = 0.5
    R_b: tuple[float, ...] = (1.0, 1.0)


@dataclass(frozen=True)
class GridSection:
    T: float = 10.0
    n_x: int = 100
    n_t: int = 0  # 0: derive from cfl
    cfl: float = 1.0
    quad_rule: str = "rectangle"


@dataclass(frozen=True)
class IntegerSection:
    F: tuple[int, ...] = (0, 1, 2)
    nu: float = 1.0


@dataclass(frozen=True)
class SweepSection:
    horizons: tuple[float, ...] = (5.0, 10.0, 20.0, 40.0, 80.0)
    kappa: bool = True


@dataclass(frozen=True)
class CertifySection:
    regime: str = "decay"
    mu_grid: tuple[float, ...] = (0.25, 0.5, 1.0, 2.0)
    n_samples: int = 1024


@dataclass(frozen=True)
class SimulateSection:
    u: tuple[float, ...] = (1.0, 0.0)
    h0: tuple[float, ...] = (0.0, 0.0)


@dataclass(frozen=True)
class PipelineSection:
    params: PipelineParams = PipelineParams()
    n_x: int = 40
    n_t: int = 816
    quad_rule: str = "trapezoid"


@dataclass(frozen=True)
class RunConfig:
    command: str
    output_dir: str = "out"
    seed: int = 42
    emit_svg: bool = False
    tol: float = 1e-10
    system: SystemSection = SystemSection()
    cost: CostSection = CostSection()
    grid: GridSection = GridSection()
    integer: IntegerSection = IntegerSection()
    sweep: SweepSection = SweepSection()
    certify: CertifySection = CertifySection()
    simulate: SimulateSection = SimulateSection()
    pipeline: PipelineSection = PipelineSection()
    present: frozenset = field(default=frozenset(), compare=False)


_SECTIONS = {
    "system": SystemSection,
    "cost": CostSection,
    "grid": GridSection,
    "integer": IntegerSection,
    "sweep": SweepSection,
    "certify": CertifySection,
    "simulate": SimulateSection,
}

_REQUIRED = {
    "certify": ("system",),
    "simulate": ("system", "grid"),
    "solve-static": ("system", "cost", "grid"),
    "solve-dynamic": ("system", "cost", "grid"),
    "solve-integer": ("system", "cost", "grid", "integer"),
    "sweep": ("system", "cost", "grid", "sweep"),
    "pipeline": (),
}


def _line_of(text: str, section: str, key: str) -> int | None:
    cur = None
    for k, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            cur = m.group(1).strip()
        elif cur == section and re.match(rf"{re.escape(key)}\s*[=:]", s, re.IGNORECASE):
            return k
    return None


def _convert(raw: str, typ, where: str):
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        if typ is str:
            return raw
        if typing.get_origin(typ) is tuple:
            inner = typing.get_args(typ)[0]
            return tuple(inner(v) for v in re.split(r"[,\s]+", raw) if v)
    except ValueError:
        raise ParseError(f"{where}: cannot read {raw!r} as {getattr(typ, '__name__', typ)}") from None
    raise ParseError(f"{where}: unsupported field type")


def _fill(cls, items: dict, section: str, text: str):
    hints = typing.get_type_hints(cls)
    kw = {}
    for key, raw in items.items():
        name = _ALIASES.get(key, key)
        match = next((f for f in hints if f.lower() == name.lower()), None)
        line = _line_of(text, section, key)
        where = f"line {line}, [{section}] {key}" if line else f"[{section}] {key}"
        if match is None:
            raise ParseError(f"{where}: unknown key")
        kw[match] = _convert(raw, hints[match], where)
    return cls(**kw)


def _parse(text: str, command: str | None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ParseError(str(exc)) from exc
    known = {"run", "pipeline", *_SECTIONS}
    for sec in cp.sections():
        if sec not in known:
            raise ParseError(f"unknown section [{sec}]")
    run = dict(cp["run"]) if cp.has_section("run") else {}
    cmd = command or run.pop("command", None)
    run.pop("command", None)
    if not cmd:
        raise ParseError("no command given ([run] command = ...)")
    if cmd not in COMMANDS:
        raise ParseError(f"unknown command {cmd!r}; expected one of {', '.join(COMMANDS)}")
    run_kw = {}
    run_types = {"output_dir": str, "seed": int, "emit_svg": bool, "tol": float}
    for key, raw in run.items():
        if key not in run_types:
            line = _line_of(text, "run", key)
            raise ParseError(f"line {line}, [run] {key}: unknown key" if line else f"[run] {key}: unknown key")
        run_kw[key] = _convert(raw, run_types[key], f"[run] {key}")
    sections = {}
    for name, cls in _SECTIONS.items():
        if cp.has_section(name):
            sections[name] = _fill(cls, dict(cp[name]), name, text)
    if cp.has_section("pipeline"):
        items = dict(cp["pipeline"])
        grid_keys = {k: items.pop(k) for k in ("n_x", "n_t", "quad_rule") if k in items}
        extra = _fill(PipelineSection, grid_keys, "pipeline", text) if grid_keys else PipelineSection()
        params = _fill(PipelineParams, items, "pipeline", text)
        sections["pipeline"] = dataclasses.replace(extra, params=params)
    return RunConfig(command=cmd, **run_kw, **sections, present=frozenset(cp.sections()))


def validate(cfg: RunConfig) -> None:
    problems = []
    missing = [s for s in _REQUIRED[cfg.command] if s not in cfg.present]
    problems += [f"section [{s}] is required by {cfg.command}" for s in missing]
    if not cfg.tol > 0:
        problems.append("tol must be positive")
    if not 0 < cfg.cost.lam < 1:
        problems.append(f"lambda must lie in (0, 1), got {cfg.cost.lam}")
    if len(cfg.cost.R_b) != 2:
        problems.append("R_b needs two entries")
    if len(cfg.system.M) != 4:
        problems.append("M needs four entries (row-major)")
    if not cfg.system.L > 0:
        problems.append("L must be positive")
    if cfg.system.eta0 > 0:
        problems.append("eta0 must be <= 0")
    if not cfg.system.d_plus > 0 or not cfg.system.d_minus < 0:
        problems.append("need d_minus < 0 < d_plus")
    g = cfg.grid
    if not g.T > 0:
        problems.append("T must be positive")
    if g.n_x < 1:
        problems.append("n_x must be >= 1")
    if g.n_t < 0:
        problems.append("n_t must be >= 0")
    if not 0 < g.cfl <= 1:
        problems.append("cfl must lie in (0, 1]")
    for rule in (g.quad_rule, cfg.pipeline.quad_rule):
        if rule not in ("rectangle", "trapezoid"):
            problems.append(f"quad_rule must be rectangle or trapezoid, got {rule!r}")
    if 0 not in cfg.integer.F:
        problems.append("F must contain 0")
    if not cfg.integer.nu > 0:
        problems.append("nu must be positive")
    hs = cfg.sweep.horizons
    if len(hs) < 3 or any(b <= a for a, b in zip(hs, hs[1:])) or hs[0] <= 0:
        problems.append("horizons must be at least three strictly increasing positive values")
    if cfg.certify.regime not in ("decay", "growth"):
        problems.append("regime must be decay or growth")
    if not cfg.certify.mu_grid:
        problems.append("mu_grid is empty")
    if len(cfg.simulate.u) != 2 or len(cfg.simulate.h0) != 2:
        problems.append("simulate u and h0 need two entries")
    if not 0 < cfg.pipeline.params.lam:
        problems.append("pipeline lambda must be positive")
    if problems:
        raise ValidationError(problems)


def loads_config(text: str, command: str | None = None) -> RunConfig:
    cfg = _parse(text, command)
    validate(cfg)
    return cfg


def load_config(path, command: str | None = None) -> RunConfig:
    """Parse and validate a config file; ``command`` overrides ``[run] command``."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {p}: {exc}") from exc
    return loads_config(text, command)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return " ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dumps_config(cfg: RunConfig) -> str:
    """Serialize every section; reloading the text gives an equal :class:`RunConfig`."""
    lines = ["[run]", f"command = {cfg.command}"]
    for key in ("output_dir", "seed", "emit_svg", "tol"):
        lines.append(f"{key} = {_fmt(getattr(cfg, key))}")
    for name in _SECTIONS:
        sec = getattr(cfg, name)
        lines += ["", f"[{name}]"]
        for f in dataclasses.fields(sec):
            val = getattr(sec, f.name)
            if f.name == "table" and not val:
                continue
            lines.append(f"{_KEYS.get(f.name, f.name)} = {_fmt(val)}")
    lines += ["", "[pipeline]"]
    pl = cfg.pipeline
    for f in dataclasses.fields(pl.params):
        lines.append(f"{_KEYS.get(f.name, f.name)} = {_fmt(getattr(pl.params, f.name))}")
    for key in ("n_x", "n_t", "quad_rule"):
        lines.append(f"{key} = {_fmt(getattr(pl, key))}")
    return "\n".join(lines) + "\n"
