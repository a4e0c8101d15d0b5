"""Scenario files: a reviewable text format for full game setups.

Grammar (line oriented, whitespace separated):

    # comment lines and blank lines are skipped
    environment {
      width 12.8
      height 9.6
      cell 0.2
      obstacle rect 2.4 2.4 23.2 4.0
      obstacle circle 4.8 4.8 0.9
    }
    field { ... }      pursuer { ... }      evader { ... }
    game { ... }       outputs { ... }

One section per name, `name {` opens and `}` closes, no nesting deeper than
that. Every value is a bare token: numbers as decimal literals, booleans as
true/false, enum-like choices as lowercase words. `obstacle` may repeat; every
other key may appear at most once per section.

Canonical form is exactly what emit_scenario produces: fixed section and key
order, all effective values materialized (so a canonical file names its
defaults explicitly), floats rendered by repr for lossless round-trips.
parse -> emit of a canonical file reproduces it byte for byte, which is what
keeps the golden scenarios honest under version control.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

from .agents import (
    EvaderFieldConfig,
    PathKind,
    RandomEvaderParams,
    ScriptedPath,
    StrategyTag,
)
from .engine import EvaderConfig, FieldConfig, PursuerConfig, Scenario
from .environment import Circle, EnvironmentSpec, Rect
from .errors import ParseError, ValidationError
from .fields import BoundaryMode, FieldKind
from .guidance import RegularizerParams

__all__ = [
    "OutputSpec",
    "ScenarioFile",
    "parse_scenario",
    "load_scenario_file",
    "emit_scenario",
]

SECTIONS = ("environment", "field", "pursuer", "evader", "game", "outputs")

_PURSUER_TAGS = {
    "laplace": StrategyTag.PURSUER_LAPLACE,
    "diffusion": StrategyTag.PURSUER_DIFFUSION,
    "wave": StrategyTag.PURSUER_WAVE,
    "duel": StrategyTag.PURSUER_HARMONIC_DUEL,
}
_EVADER_TAGS = {
    "scripted": StrategyTag.EVADER_SCRIPTED,
    "harmonic": StrategyTag.EVADER_HARMONIC,
    "random": StrategyTag.EVADER_RANDOM,
}
_FIELD_KINDS = {
    "laplace": FieldKind.LAPLACE,
    "diffusion": FieldKind.DIFFUSION,
    "wave": FieldKind.WAVE,
}
_PATH_KINDS = {
    "stationary": PathKind.STATIONARY,
    "linear": PathKind.LINEAR,
    "sinusoid": PathKind.LINEAR_SINUSOID,
}


@dataclass(frozen=True)
class OutputSpec:
    trace: str | None = None
    figures: tuple[str, ...] = ()


@dataclass(frozen=True)
class ScenarioFile:
    scenario: Scenario
    outputs: OutputSpec
    # keys the file left implicit, as "section.key = value" strings
    defaults_applied: tuple[str, ...]
    canonical_text: str


# -- low-level reader ----------------------------------------------------------

def _tokenize(text: str):
    """Yield (line_number, tokens) for every meaningful line."""
    for ln, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if stripped:
            yield ln, stripped.split()


def _sections(text: str) -> dict:
    """Split the file into {section: {key: (line, tokens) | [(line, tokens)]}}."""
    out: dict = {}
    current = None
    current_name = ""
    for ln, toks in _tokenize(text):
        if current is None:
            if len(toks) != 2 or toks[1] != "{":
                raise ParseError("expected 'section {'", ln)
            name = toks[0]
            if name not in SECTIONS:
                raise ValidationError(f"unknown section {name!r}", field=name)
            if name in out:
                raise ParseError(f"section {name!r} appears twice", ln)
            current = {}
            current_name = name
            out[name] = current
            continue
        if toks == ["}"]:
            current = None
            continue
        key = toks[0]
        rest = toks[1:]
        if not rest:
            raise ParseError(f"key {key!r} has no value", ln)
        if key == "obstacle":
            current.setdefault("obstacle", []).append((ln, rest))
        elif key in current:
            raise ParseError(f"duplicate key {key!r} in section {current_name!r}", ln)
        else:
            current[key] = (ln, rest)
    if current is not None:
        raise ParseError("unterminated section at end of file", ln)
    return out


class _Section:
    """One section's keys with typed, consumed-or-rejected access."""

    def __init__(self, name: str, data: dict, defaults: list):
        self.name = name
        self.data = dict(data)
        self.defaults = defaults

    def _pop(self, key):
        return self.data.pop(key, None)

    def _field(self, key):
        return f"{self.name}.{key}"

    def _one(self, entry, key, count=1):
        ln, toks = entry
        if len(toks) != count:
            raise ValidationError(
                f"expected {count} value(s), got {len(toks)}", field=self._field(key))
        return toks

    def number(self, key, default=None, required=False):
        entry = self._pop(key)
        if entry is None:
            if required:
                raise ValidationError("missing required key", field=self._field(key))
            if default is not None:
                self.defaults.append(f"{self._field(key)} = {_num(default)}")
            return default
        tok = self._one(entry, key)[0]
        try:
            value = float(tok)
        except ValueError:
            raise ValidationError(f"not a number: {tok!r}", field=self._field(key))
        if not math.isfinite(value):
            raise ValidationError("value must be finite", field=self._field(key))
        return value

    def integer(self, key, default=None):
        entry = self._pop(key)
        if entry is None:
            if default is not None:
                self.defaults.append(f"{self._field(key)} = {default}")
            return default
        tok = self._one(entry, key)[0]
        try:
            return int(tok)
        except ValueError:
            raise ValidationError(f"not an integer: {tok!r}", field=self._field(key))

    def boolean(self, key, default):
        entry = self._pop(key)
        if entry is None:
            self.defaults.append(f"{self._field(key)} = {_bool(default)}")
            return default
        tok = self._one(entry, key)[0]
        if tok not in ("true", "false"):
            raise ValidationError(f"expected true or false, got {tok!r}",
                                  field=self._field(key))
        return tok == "true"

    def word(self, key, choices=None, default=None, required=False):
        entry = self._pop(key)
        if entry is None:
            if required:
                raise ValidationError("missing required key", field=self._field(key))
            if default is not None:
                self.defaults.append(f"{self._field(key)} = {default}")
            return default
        tok = self._one(entry, key)[0]
        if choices is not None and tok not in choices:
            raise ValidationError(
                f"expected one of {sorted(choices)}, got {tok!r}", field=self._field(key))
        return tok

    def pair(self, key, required=False):
        entry = self._pop(key)
        if entry is None:
            if required:
                raise ValidationError("missing required key", field=self._field(key))
            return None
        toks = self._one(entry, key, count=2)
        try:
            return (float(toks[0]), float(toks[1]))
        except ValueError:
            raise ValidationError(f"expected two numbers, got {toks}",
                                  field=self._field(key))

    def raw(self, key):
        return self._pop(key)

    def finish(self):
        for key in self.data:
            raise ValidationError("unknown key", field=self._field(key))


def _num(x) -> str:
    f = float(x)
    if f == int(f) and abs(f) < 1e16:
        # keep integral floats short but unambiguous
        return repr(f)
    return repr(f)


def _bool(b: bool) -> str:
    return "true" if b else "false"


# -- section builders ------------------------------------------------------------

def _build_environment(sec: _Section) -> EnvironmentSpec:
    width = sec.number("width", required=True)
    height = sec.number("height", required=True)
    cell = sec.number("cell", required=True)
    obstacles = []
    for ln, toks in sec.data.pop("obstacle", []):
        shape, args = toks[0], toks[1:]
        try:
            vals = [float(t) for t in args]
        except ValueError:
            raise ParseError(f"bad obstacle numbers {args}", ln)
        if shape == "rect" and len(vals) == 4:
            obstacles.append(Rect(*vals))
        elif shape == "circle" and len(vals) == 3:
            obstacles.append(Circle(*vals))
        else:
            raise ParseError(
                f"obstacle must be 'rect x0 y0 x1 y1' or 'circle cx cy r', got {toks}", ln)
    sec.finish()
    return EnvironmentSpec(width, height, cell, tuple(obstacles))


def _build_field(sec: _Section) -> FieldConfig:
    kind = _FIELD_KINDS[sec.word("kind", choices=_FIELD_KINDS, default="wave")]
    wave_speed = sec.number("wave_speed", default=1.0)
    damping = sec.number("damping")  # optional, None picks the solver default
    level = sec.number("level", default=1.0)
    boundary = sec.word("boundary", choices=("dirichlet", "neumann"),
                        default="dirichlet")
    n_sub = sec.integer("substeps", default=0)
    target_radius = sec.number("target_radius")
    tol = sec.number("tol")
    max_iters = sec.integer("max_iters", default=20000)
    sec.finish()
    return FieldConfig(
        kind=kind, wave_speed=wave_speed, damping=damping, level=level,
        boundary_mode=BoundaryMode.DIRICHLET if boundary == "dirichlet"
        else BoundaryMode.NEUMANN,
        n_sub=n_sub, target_radius=target_radius, tol=tol, max_iters=max_iters,
    )


def _build_pursuer(sec: _Section) -> PursuerConfig:
    tag = _PURSUER_TAGS[sec.word("strategy", choices=_PURSUER_TAGS, required=True)]
    speed = sec.number("speed", required=True)
    start = sec.pair("start", required=True)
    normalize = sec.boolean("normalize", True)
    threshold = sec.number("floor_threshold", default=1e-3)
    floor = sec.number("floor_value", default=1e-4)
    planner = EvaderFieldConfig()
    if tag is StrategyTag.PURSUER_HARMONIC_DUEL:
        refresh = sec.integer("replan_every", default=planner.refresh_every)
        scale = sec.integer("replan_scale", default=planner.grid_scale)
        radius = sec.number("replan_radius")
        planner = dataclasses.replace(
            planner, refresh_every=refresh, grid_scale=scale,
            pursuer_disk_radius=radius)
    sec.finish()
    return PursuerConfig(
        strategy=tag, speed=speed, start=start, normalize=normalize,
        regularizer=RegularizerParams(threshold=threshold, floor=floor),
        planner=planner,
    )


def _build_evader(sec: _Section) -> EvaderConfig:
    tag = _EVADER_TAGS[sec.word("strategy", choices=_EVADER_TAGS, required=True)]
    speed = sec.number("speed", required=True)
    if speed < 0.0:
        raise ValidationError("speed must be nonnegative", field="evader.speed")
    start = sec.pair("start", required=True)
    path = None
    random_params = None
    field_config = EvaderFieldConfig()

    if tag is StrategyTag.EVADER_SCRIPTED:
        entry = sec.raw("path")
        if entry is None:
            path = ScriptedPath()
            sec.defaults.append("evader.path = stationary")
        else:
            ln, toks = entry
            kind_word = toks[0]
            if kind_word not in _PATH_KINDS:
                raise ValidationError(
                    f"expected one of {sorted(_PATH_KINDS)}, got {kind_word!r}",
                    field="evader.path")
            try:
                args = [float(t) for t in toks[1:]]
            except ValueError:
                raise ParseError(f"bad path numbers {toks[1:]}", ln)
            kind = _PATH_KINDS[kind_word]
            if kind is PathKind.STATIONARY and len(args) == 0:
                path = ScriptedPath()
            elif kind is PathKind.LINEAR and len(args) == 2:
                path = ScriptedPath(kind, (args[0], args[1]))
            elif kind is PathKind.LINEAR_SINUSOID and len(args) == 5:
                path = ScriptedPath(kind, (args[0], args[1]), args[2], args[3], args[4])
            else:
                raise ParseError(
                    "path must be 'stationary', 'linear vx vy', or "
                    "'sinusoid vx vy amplitude frequency phase'", ln)
    elif tag is StrategyTag.EVADER_RANDOM:
        random_params = RandomEvaderParams(
            risk_level=sec.number("risk", default=0.6),
            d_safe=sec.number("safe_distance", default=4.0),
            candidate_count=sec.integer("candidates", default=16),
            rng_seed=sec.integer("draw_seed", default=0),
        )
    else:
        field_config = EvaderFieldConfig(
            d_safe=sec.number("safe_distance", default=4.0),
            grid_scale=sec.integer("grid_scale", default=2),
            pursuer_disk_radius=sec.number("disk_radius"),
            refresh_every=sec.integer("refresh_every", default=1),
            horizon=sec.number("horizon", default=4.0),
            diffusivity=sec.number("diffusivity", default=1.0),
        )
    sec.finish()
    return EvaderConfig(
        strategy=tag, speed=speed, start=start, path=path,
        random_params=random_params, field_config=field_config,
    )


def _empty_section(name: str, defaults: list) -> _Section:
    return _Section(name, {}, defaults)


def parse_scenario(path) -> Scenario:
    """Parse and validate a scenario file; see load_scenario_file for the
    variant that also returns outputs and default provenance."""
    return load_scenario_file(path).scenario


def load_scenario_file(path) -> ScenarioFile:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return parse_scenario_text(text, fallback_name=_stem(str(path)))


def _stem(path: str) -> str:
    base = path.replace("\\", "/").rsplit("/", 1)[-1]
    return base.rsplit(".", 1)[0] if "." in base else base


def parse_scenario_text(text: str, fallback_name: str = "scenario") -> ScenarioFile:
    raw = _sections(text)
    defaults: list = []

    if "environment" not in raw:
        raise ValidationError("missing required section", field="environment")
    for required in ("pursuer", "evader"):
        if required not in raw:
            raise ValidationError("missing required section", field=required)

    env_spec = _build_environment(_Section("environment", raw["environment"], defaults))
    field = _build_field(_Section("field", raw.get("field", {}), defaults))
    pursuer = _build_pursuer(_Section("pursuer", raw["pursuer"], defaults))
    evader = _build_evader(_Section("evader", raw["evader"], defaults))

    game = _Section("game", raw.get("game", {}), defaults)
    name = game.word("name", default=fallback_name)
    dt = game.number("dt", default=0.05)
    duration = game.number("duration", default=120.0)
    capture_radius = game.number("capture_radius", default=0.25)
    seed = game.integer("seed", default=0)
    stop_on_capture = game.boolean("stop_on_capture", True)
    game.finish()

    outputs_sec = _Section("outputs", raw.get("outputs", {}), [])
    trace_entry = outputs_sec.raw("trace")
    trace_name = trace_entry[1][0] if trace_entry else None
    figures_entry = outputs_sec.raw("figures")
    figures = tuple(figures_entry[1]) if figures_entry else ()
    outputs_sec.finish()

    scenario = Scenario(
        name=name, environment=env_spec, pursuer=pursuer, evader=evader,
        field=field, dt=dt, duration=duration, capture_radius=capture_radius,
        rng_seed=seed, stop_on_capture=stop_on_capture,
    )
    outputs = OutputSpec(trace=trace_name, figures=figures)
    return ScenarioFile(
        scenario=scenario, outputs=outputs,
        defaults_applied=tuple(defaults),
        canonical_text=emit_scenario(scenario, outputs),
    )


# -- emission ---------------------------------------------------------------------

def emit_scenario(scenario: Scenario, outputs: OutputSpec | None = None) -> str:
    """Render the canonical text form; parse(emit(s)) == s and emitting again
    reproduces the same bytes."""
    out = []
    env = scenario.environment
    out.append("environment {")
    out.append(f"  width {_num(env.width)}")
    out.append(f"  height {_num(env.height)}")
    out.append(f"  cell {_num(env.cell_size)}")
    for shape in env.obstacles:
        if isinstance(shape, Rect):
            out.append(f"  obstacle rect {_num(shape.xmin)} {_num(shape.ymin)} "
                       f"{_num(shape.xmax)} {_num(shape.ymax)}")
        else:
            out.append(f"  obstacle circle {_num(shape.cx)} {_num(shape.cy)} "
                       f"{_num(shape.radius)}")
    out.append("}")

    f = scenario.field
    kind_word = {v: k for k, v in _FIELD_KINDS.items()}[f.kind]
    out.append("field {")
    out.append(f"  kind {kind_word}")
    out.append(f"  wave_speed {_num(f.wave_speed)}")
    if f.damping is not None:
        out.append(f"  damping {_num(f.damping)}")
    out.append(f"  level {_num(f.level)}")
    out.append("  boundary "
               + ("dirichlet" if f.boundary_mode is BoundaryMode.DIRICHLET else "neumann"))
    out.append(f"  substeps {f.n_sub}")
    if f.target_radius is not None:
        out.append(f"  target_radius {_num(f.target_radius)}")
    if f.tol is not None:
        out.append(f"  tol {_num(f.tol)}")
    out.append(f"  max_iters {f.max_iters}")
    out.append("}")

    p = scenario.pursuer
    tag_word = {v: k for k, v in _PURSUER_TAGS.items()}[p.strategy]
    out.append("pursuer {")
    out.append(f"  strategy {tag_word}")
    out.append(f"  speed {_num(p.speed)}")
    out.append(f"  start {_num(p.start[0])} {_num(p.start[1])}")
    out.append(f"  normalize {_bool(p.normalize)}")
    out.append(f"  floor_threshold {_num(p.regularizer.threshold)}")
    out.append(f"  floor_value {_num(p.regularizer.floor)}")
    if p.strategy is StrategyTag.PURSUER_HARMONIC_DUEL:
        out.append(f"  replan_every {p.planner.refresh_every}")
        out.append(f"  replan_scale {p.planner.grid_scale}")
        if p.planner.pursuer_disk_radius is not None:
            out.append(f"  replan_radius {_num(p.planner.pursuer_disk_radius)}")
    out.append("}")

    e = scenario.evader
    etag_word = {v: k for k, v in _EVADER_TAGS.items()}[e.strategy]
    out.append("evader {")
    out.append(f"  strategy {etag_word}")
    out.append(f"  speed {_num(e.speed)}")
    out.append(f"  start {_num(e.start[0])} {_num(e.start[1])}")
    if e.strategy is StrategyTag.EVADER_SCRIPTED:
        path = e.path or ScriptedPath()
        if path.kind is PathKind.STATIONARY:
            out.append("  path stationary")
        elif path.kind is PathKind.LINEAR:
            out.append(f"  path linear {_num(path.base_velocity[0])} "
                       f"{_num(path.base_velocity[1])}")
        else:
            out.append(f"  path sinusoid {_num(path.base_velocity[0])} "
                       f"{_num(path.base_velocity[1])} {_num(path.amplitude)} "
                       f"{_num(path.frequency)} {_num(path.phase)}")
    elif e.strategy is StrategyTag.EVADER_RANDOM:
        rp = e.random_params or RandomEvaderParams()
        out.append(f"  risk {_num(rp.risk_level)}")
        out.append(f"  safe_distance {_num(rp.d_safe)}")
        out.append(f"  candidates {rp.candidate_count}")
        out.append(f"  draw_seed {rp.rng_seed}")
    else:
        fc = e.field_config
        out.append(f"  safe_distance {_num(fc.d_safe)}")
        out.append(f"  grid_scale {fc.grid_scale}")
        if fc.pursuer_disk_radius is not None:
            out.append(f"  disk_radius {_num(fc.pursuer_disk_radius)}")
        out.append(f"  refresh_every {fc.refresh_every}")
        out.append(f"  horizon {_num(fc.horizon)}")
        out.append(f"  diffusivity {_num(fc.diffusivity)}")
    out.append("}")

    out.append("game {")
    out.append(f"  name {scenario.name}")
    out.append(f"  dt {_num(scenario.dt)}")
    out.append(f"  duration {_num(scenario.duration)}")
    out.append(f"  capture_radius {_num(scenario.capture_radius)}")
    out.append(f"  seed {scenario.rng_seed}")
    out.append(f"  stop_on_capture {_bool(scenario.stop_on_capture)}")
    out.append("}")

    if outputs is not None and (outputs.trace or outputs.figures):
        out.append("outputs {")
        if outputs.trace:
            out.append(f"  trace {outputs.trace}")
        if outputs.figures:
            out.append("  figures " + " ".join(outputs.figures))
        out.append("}")

    return "\n".join(out) + "\n"
