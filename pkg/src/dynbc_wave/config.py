"""Sectioned ``key = value`` run configuration.

Grammar (one item per line)::

    # comment            (also ';' at line start)
    [section]
    key = value          # trailing comment allowed

Values are JSON (numbers, strings, booleans, lists) with three extensions:
``inf``/``-inf`` are accepted anywhere a number is, and a bare word such as
``midpoint`` is read as a string.  Every problem found is reported with its
line number; parsing does not stop at the first error.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assembly import DiscreteOperators
from .harness import SWEEP_DEFAULTS, bump_profile, build_negative_energy_data, eigenmode_profile
from .mesh import (
    InvalidParameterError,
    Mesh,
    generate_annulus,
    generate_interval,
    generate_rectangle,
    read_mesh_csv,
)
from .nonlin import CoefficientField, PowerSum, ProblemSpec
from .stepper import StepperConfig


class ConfigError(ValueError):
    """Collected configuration problems as ``(line, message)`` pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(f"line {ln}: {msg}" if ln else msg for ln, msg in self.errors))


# key -> (kind, default); kind drives validation below.
SCHEMA = {
    "mesh": {
        "geometry": ("str", None),
        "L": ("pos", 1.0),
        "n": ("int>=2", 100),
        "r0": ("pos", 0.3),
        "r1": ("pos", 1.0),
        "nr": ("int>=2", 8),
        "nt": ("int>=8", 32),
        "Lx": ("pos", 1.0),
        "Ly": ("pos", 1.0),
        "nx": ("int>=2", 8),
        "ny": ("int>=2", 8),
        "gamma1_side": ("str", "top"),
        "path": ("file", None),
        "empty_gamma1": ("bool", False),
    },
    "damping.P": {"terms": ("damping_terms", []), "field": ("nonneg", 1.0)},
    "damping.Q": {"terms": ("damping_terms", []), "field": ("nonneg", 1.0)},
    "source.f": {"terms": ("source_terms", []), "constant": ("real", 0.0)},
    "source.g": {"terms": ("source_terms", []), "constant": ("real", 0.0)},
    "problem": {"dimension": ("int>=2", 2)},
    "initial": {
        "profile": ("str", "zero"),
        "amplitude": ("real", 1.0),
        "center": ("point", None),
        "radius": ("pos", None),
        "scale": ("real", 1.0),
        "velocity_scale": ("real", 0.0),
        "s_max": ("pos", 1e8),
        "path": ("file", None),
    },
    "time": {
        "t_end": ("pos", None),
        "dt_init": ("pos", 1e-3),
        "dt_min": ("pos", 1e-10),
        "dt_max": ("pos", None),
        "newton_tol": ("pos", 1e-10),
        "newton_max_iters": ("int>=1", 50),
        "growth_cap": ("gt1", 10.0),
        "truncation_radius": ("pos", math.inf),
        "scheme": ("str", "midpoint"),
        "max_rel_change": ("pos", 0.1),
        "dissipation_rule": ("str", "scheme"),
        "blowup_norm": ("pos", 1e100),
    },
    "output": {
        "directory": ("str", "out"),
        "sample_every": ("int>=1", 1),
        "snapshot_every": ("int>=0", 0),
    },
    "sweep": {k: ("grid", None) for k in SWEEP_DEFAULTS} | {"jobs": ("int>=1", 1)},
}
REQUIRED = ("mesh", "time")
CHOICES = {
    ("mesh", "geometry"): ("interval", "annulus", "rectangle", "file"),
    ("mesh", "gamma1_side"): ("top", "bottom", "left", "right"),
    ("initial", "profile"): ("zero", "eigenmode", "bump", "negative_energy", "file"),
    ("time", "scheme"): ("midpoint", "backward_euler"),
    ("time", "dissipation_rule"): ("scheme", "trapezoid"),
}

_SECTION = re.compile(r"^\[\s*([A-Za-z0-9_.]+)\s*\]$")
_KEY = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")
_BARE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-/]*$")
_INF = re.compile(r"(?<![\w.\"])([+-]?)inf(?![\w\"])")


def parse_value(text: str):
    text = text.strip()
    if not text:
        raise ValueError("missing value")
    try:
        return json.loads(_INF.sub(lambda m: m.group(1).lstrip("+") + "1e999", text))
    except json.JSONDecodeError:
        pass
    if " #" in text:
        return parse_value(text.split(" #", 1)[0])
    if _BARE.match(text):
        return text
    raise ValueError(f"cannot parse value {text!r}")


@dataclass
class RunConfig:
    sections: dict
    lines: dict
    source_text: str
    path: Path | None = None
    stepper: StepperConfig = field(default_factory=StepperConfig)

    def get(self, section: str, key: str):
        sec = self.sections.get(section, {})
        if key in sec:
            return sec[key]
        return SCHEMA[section][key][1]

    @property
    def t_end(self) -> float:
        return float(self.get("time", "t_end"))

    def has(self, section: str) -> bool:
        return section in self.sections


def _is_num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _check(kind: str, val, base: Path):
    """Return an error message for ``val`` or None."""
    if kind == "str":
        return None if isinstance(val, str) else "must be a string"
    if kind == "bool":
        return None if isinstance(val, bool) else "must be true or false"
    if kind == "file":
        if not isinstance(val, str):
            return "must be a path string"
        p = Path(val) if Path(val).is_absolute() else base / val
        return None if p.is_file() else f"file not found: {val}"
    if kind.startswith("int"):
        if not (isinstance(val, int) and not isinstance(val, bool)):
            return "must be an integer"
        lo = int(kind.split(">=")[1])
        return None if val >= lo else f"must be >= {lo}"
    if kind in ("pos", "nonneg", "real", "gt1"):
        if not _is_num(val) or math.isnan(val):
            return "must be a number"
        if kind == "pos" and not val > 0:
            return "must be > 0"
        if kind == "nonneg" and not (val >= 0 and math.isfinite(val)):
            return "must be finite and >= 0"
        if kind == "gt1" and not val > 1:
            return "must be > 1"
        if kind == "real" and not math.isfinite(val):
            return "must be finite"
        return None
    if kind == "point":
        if not (isinstance(val, list) and 1 <= len(val) <= 2 and all(_is_num(x) for x in val)):
            return "must be a list of 1 or 2 coordinates"
        return None
    if kind in ("damping_terms", "source_terms"):
        if not isinstance(val, list):
            return "must be a list of [coef, exponent] pairs"
        for t in val:
            if not (isinstance(t, list) and len(t) == 2 and all(_is_num(x) for x in t)):
                return f"term {t!r} must be [coef, exponent]"
            c, e = t
            if kind == "damping_terms":
                if not e > 1:
                    return "exponent must be > 1"
                if c < 0:
                    return "damping coefficient must be >= 0"
            elif e < 2:
                return "source exponent must be >= 2"
            if not (math.isfinite(c) and math.isfinite(e)):
                return "terms must be finite"
        return None
    if kind == "grid":
        vals = val if isinstance(val, list) else [val]
        return None if vals else "grid list must not be empty"
    raise AssertionError(kind)


def parse_config_text(text: str, base: Path = Path(".")) -> RunConfig:
    errors = []
    sections: dict = {}
    lines: dict = {}
    current = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = _SECTION.match(line)
        if m:
            name = m.group(1)
            if name not in SCHEMA:
                errors.append((ln, f"unknown section [{name}]"))
                current = None
            elif name in sections:
                errors.append((ln, f"duplicate section [{name}] (first at line {lines[(name, None)]})"))
                current = None
            else:
                sections[name] = {}
                lines[(name, None)] = ln
                current = name
            continue
        m = _KEY.match(line)
        if not m:
            errors.append((ln, f"cannot parse line {line!r}"))
            continue
        key, rhs = m.group(1), m.group(2)
        if current is None:
            if not any(e[0] == ln for e in errors):
                errors.append((ln, f"key {key!r} outside a known section"))
            continue
        if key not in SCHEMA[current]:
            errors.append((ln, f"unknown key {key!r} in [{current}]"))
            continue
        if key in sections[current]:
            errors.append((ln, f"duplicate key {key!r} in [{current}]"))
            continue
        try:
            val = parse_value(rhs)
        except ValueError as exc:
            errors.append((ln, str(exc)))
            continue
        kind = SCHEMA[current][key][0]
        msg = _check(kind, val, base)
        if msg is None and (current, key) in CHOICES and val not in CHOICES[(current, key)]:
            msg = f"must be one of {', '.join(CHOICES[(current, key)])}"
        if msg:
            errors.append((ln, f"[{current}] {key}: {msg}"))
            continue
        sections[current][key] = val
        lines[(current, key)] = ln

    for sec in REQUIRED:
        if sec not in sections and not any("duplicate" in e[1] and f"[{sec}]" in e[1] for e in errors):
            errors.append((0, f"missing section [{sec}]"))
    if "mesh" in sections:
        geo = sections["mesh"].get("geometry")
        if geo is None:
            errors.append((lines[("mesh", None)], "[mesh] geometry is required"))
        elif geo == "file" and "path" not in sections["mesh"]:
            errors.append((lines[("mesh", "geometry")], "[mesh] geometry = file needs a path"))
    if "time" in sections and "t_end" not in sections["time"]:
        errors.append((lines[("time", None)], "[time] t_end is required"))
    ini = sections.get("initial", {})
    if ini.get("profile") == "file" and "path" not in ini:
        errors.append((lines[("initial", "profile")], "[initial] profile = file needs a path"))

    cfg = RunConfig(sections, lines, text, None)
    if "time" in sections:
        t = sections["time"]
        try:
            cfg.stepper = StepperConfig(**{k: v for k, v in t.items() if k != "t_end"})
        except InvalidParameterError as exc:
            errors.append((lines[("time", None)], f"[time] {exc}"))
    if errors:
        raise ConfigError(sorted(errors, key=lambda e: e[0]))
    return cfg


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([(0, f"cannot read config: {exc}")]) from exc
    cfg = parse_config_text(text, path.parent)
    cfg.path = path
    return cfg


def _resolve(cfg: RunConfig, p: str) -> Path:
    q = Path(p)
    if q.is_absolute() or cfg.path is None:
        return q
    return cfg.path.parent / q


# -- builders ---------------------------------------------------------------
def build_mesh(cfg: RunConfig) -> Mesh:
    g = lambda k: cfg.get("mesh", k)  # noqa: E731
    geo = g("geometry")
    if geo == "interval":
        mesh = generate_interval(g("L"), g("n"))
    elif geo == "annulus":
        mesh = generate_annulus(g("r0"), g("r1"), g("nr"), g("nt"))
    elif geo == "rectangle":
        mesh = generate_rectangle(g("Lx"), g("Ly"), g("nx"), g("ny"), g("gamma1_side"))
    else:
        mesh = read_mesh_csv(_resolve(cfg, g("path")))
    if g("empty_gamma1"):
        mesh = mesh.without_gamma1()
    return mesh


def build_spec(cfg: RunConfig) -> ProblemSpec:
    def terms(sec):
        return tuple(tuple(t) for t in cfg.get(sec, "terms"))

    return ProblemSpec(
        P=PowerSum.damping(*terms("damping.P")),
        Q=PowerSum.damping(*terms("damping.Q")),
        f=PowerSum.source(*terms("source.f"), constant=cfg.get("source.f", "constant")),
        g=PowerSum.source(*terms("source.g"), constant=cfg.get("source.g", "constant")),
        alpha=CoefficientField(cfg.get("damping.P", "field")),
        beta=CoefficientField(cfg.get("damping.Q", "field")),
        N=cfg.get("problem", "dimension"),
    )


def read_initial_csv(path, ops: DiscreteOperators):
    """Nodal ``u,v`` CSV (header line, one row per mesh node) -> free-dof vectors."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape != (ops.mesh.n_nodes, 2):
        raise InvalidParameterError(
            f"initial-data file must have {ops.mesh.n_nodes} rows of u,v; got shape {data.shape}"
        )
    return ops.restrict(data[:, 0]), ops.restrict(data[:, 1])


def build_initial(cfg: RunConfig, ops: DiscreteOperators, spec: ProblemSpec):
    g = lambda k: cfg.get("initial", k)  # noqa: E731
    prof = g("profile")
    vel = g("velocity_scale")
    if prof == "zero":
        return np.zeros(ops.n), np.zeros(ops.n)
    if prof == "file":
        return read_initial_csv(_resolve(cfg, g("path")), ops)
    if prof == "eigenmode":
        u0 = eigenmode_profile(ops, g("amplitude"))
        return u0, vel * u0
    if prof == "bump":
        if g("center") is None or g("radius") is None:
            raise InvalidParameterError("bump profile needs center and radius")
        u0 = bump_profile(ops, g("center"), g("radius"), g("scale"))
        return u0, vel * u0
    v0 = None
    if vel:
        v0 = vel * bump_profile(ops, g("center"), g("radius")) if g("center") is not None else vel * np.ones(ops.n)
    u0, v0, _ = build_negative_energy_data(ops, spec, v0, g("s_max"), g("center"), g("radius"))
    return u0, v0


def sweep_grid(cfg: RunConfig) -> dict:
    """Grid from ``[sweep]``; scalar entries are one-point axes.  Unset rod
    parameters inherit n, t_end and dt from the mesh and time sections."""
    sec = {k: v for k, v in cfg.sections.get("sweep", {}).items() if k != "jobs"}
    grid = {k: (v if isinstance(v, list) else [v]) for k, v in sec.items()}
    if "t_end" not in grid:
        grid["t_end"] = [cfg.t_end]
    if "dt" not in grid:
        grid["dt"] = [cfg.get("time", "dt_init")]
    if "n" not in grid and cfg.get("mesh", "geometry") == "interval":
        grid["n"] = [cfg.get("mesh", "n")]
    return grid
