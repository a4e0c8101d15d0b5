"""Closed-loop pursuit-evasion runs.

One tick covers [t, t+dt): the pursuer's field absorbs the latest evader
position and advances to t+dt (sub-stepped to respect the stability bound),
the evader's risk field refreshes if due, both agents read the pre-tick
positions (simultaneous update, neither sees the other's new move), and
explicit Euler moves them under the collision rule. Each trace row holds the
state at a tick boundary together with the command that produced it and the
field quantities sampled at the pursuer, so the realized descent rate can be
checked offline against the field's own gradient.
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from . import __version__
from .agents import (
    EVADER_TAGS,
    PURSUER_TAGS,
    _PURSUER_FIELD_KIND,
    AgentState,
    EvaderFieldConfig,
    RandomEvaderParams,
    ScriptedPath,
    StrategyTag,
    evader_harmonic_step,
    evader_random_step,
    evader_scripted_step,
    pursuer_duel_step,
    pursuer_step,
    refresh_evader_field,
)
from .environment import Environment, EnvironmentSpec, build_environment
from .errors import (
    DegenerateNormal,
    NotBoundaryCell,
    ScenarioInvalid,
    SolverFailure,
    ValidationError,
)
from .fields import (
    BoundaryMode,
    FieldKind,
    TargetFootprint,
    cfl_max_dt,
    diffusion_max_dt,
    make_time_field,
    reset_for_target,
    solve_laplace,
    step_diffusion,
    step_wave,
)
from .guidance import (
    RegularizerParams,
    guidance_regularized,
    sample_gradient,
    sample_potential,
    sample_time_derivative,
)
from .kernels import backend_name


@dataclass(frozen=True)
class FieldConfig:
    kind: FieldKind = FieldKind.WAVE
    wave_speed: float = 1.0
    damping: float | None = None  # None picks the default tied to the domain size
    level: float = 1.0
    boundary_mode: BoundaryMode = BoundaryMode.DIRICHLET
    n_sub: int = 0  # 0 derives the sub-step count from the stability bound
    target_radius: float | None = None
    tol: float | None = None
    max_iters: int = 20000


@dataclass(frozen=True)
class PursuerConfig:
    strategy: StrategyTag
    speed: float
    start: tuple[float, float]
    # raw mode keeps the command unnormalized; the realized potential then
    # decays at the rate the descent law promises, which the analysis checks
    normalize: bool = True
    regularizer: RegularizerParams = RegularizerParams()
    # classic-planner pursuit only: coarse raster and replan cadence for the
    # harmonic duel strategy; ignored by the field-following strategies
    planner: EvaderFieldConfig = EvaderFieldConfig()


@dataclass(frozen=True)
class EvaderConfig:
    strategy: StrategyTag
    speed: float
    start: tuple[float, float]
    path: ScriptedPath | None = None
    random_params: RandomEvaderParams | None = None
    field_config: EvaderFieldConfig = EvaderFieldConfig()


@dataclass(frozen=True)
class Scenario:
    name: str
    environment: EnvironmentSpec
    pursuer: PursuerConfig
    evader: EvaderConfig
    field: FieldConfig = FieldConfig()
    dt: float = 0.05
    duration: float = 120.0
    capture_radius: float = 0.25
    rng_seed: int = 0
    stop_on_capture: bool = True


@dataclass
class GameTrace:
    t: np.ndarray
    pursuer: np.ndarray
    evader: np.ndarray
    distance: np.ndarray
    command: np.ndarray  # pursuer command applied over the step ending at each row
    potential: np.ndarray
    grad_sq: np.ndarray
    dvdt: np.ndarray
    # same quantities where the command was computed: pre-move position on the
    # advanced field; realized potential decay is checked against these
    cmd_grad_sq: np.ndarray
    cmd_dvdt: np.ndarray
    clearance_p: np.ndarray
    clearance_e: np.ndarray
    captured: np.ndarray
    metadata: dict = dataclass_field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    @property
    def was_captured(self) -> bool:
        return bool(self.captured.any())

    @property
    def first_capture_tick(self) -> int | None:
        hits = np.flatnonzero(self.captured)
        return int(hits[0]) if hits.size else None


@dataclass(frozen=True)
class CaptureReport:
    captured: bool
    first_capture_tick: int | None
    final_distance: float
    lock_fraction: float
    capture_radius: float
    lock_threshold: float


def _canonical(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: _canonical(v) for k, v in sorted(dataclasses.asdict(obj).items())}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, dict):
        return {k: _canonical(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    return obj


def scenario_digest(scenario: Scenario) -> str:
    """Stable content hash; identical scenarios hash identically regardless
    of how they were constructed."""
    blob = json.dumps(_canonical(scenario), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# -- validation ----------------------------------------------------------------


def _require(cond: bool, message: str):
    if not cond:
        raise ScenarioInvalid(message)


def validate_scenario(scenario: Scenario, env: Environment | None = None) -> Environment:
    """Full structural check; returns the rasterized environment."""
    s = scenario
    _require(s.dt > 0.0, f"dt must be positive, got {s.dt:g}")
    _require(s.duration > 0.0, f"duration must be positive, got {s.duration:g}")
    _require(s.capture_radius > 0.0, "capture_radius must be positive")
    _require(s.pursuer.speed >= 0.0 and s.evader.speed >= 0.0, "speeds must be nonnegative")
    _require(s.pursuer.strategy in PURSUER_TAGS,
             f"{s.pursuer.strategy.value} is not a pursuer strategy")
    _require(s.evader.strategy in EVADER_TAGS,
             f"{s.evader.strategy.value} is not an evader strategy")
    want = _PURSUER_FIELD_KIND[s.pursuer.strategy]
    _require(s.field.kind is want,
             f"pursuer strategy {s.pursuer.strategy.value} needs a {want.value} field, "
             f"scenario configures {s.field.kind.value}")
    _require(s.field.wave_speed > 0.0, "wave_speed must be positive")
    _require(s.field.damping is None or s.field.damping >= 0.0, "damping must be nonnegative")
    _require(s.field.n_sub >= 0, "n_sub must be nonnegative")
    if env is None:
        try:
            env = build_environment(s.environment)
        except ValidationError as e:
            raise ScenarioInvalid(f"environment rejected: {e}") from e
    for label, start in (("pursuer", s.pursuer.start), ("evader", s.evader.start)):
        _require(env.in_free_space(*start), f"{label} start {start} is not in free space")
    if s.evader.strategy is StrategyTag.EVADER_SCRIPTED:
        _require(s.evader.path is not None, "scripted evader needs a path")
        probe = 0.0
        step = s.dt / 4.0
        while probe <= s.duration + 1e-9:
            p = s.evader.path.position(min(probe, s.duration), s.evader.start)
            _require(env.in_free_space(p[0], p[1]),
                     f"scripted path leaves free space at t={probe:g} ({p[0]:g}, {p[1]:g})")
            probe += step
    if s.evader.strategy in (StrategyTag.EVADER_HARMONIC, StrategyTag.EVADER_RANDOM):
        cfg = s.evader.field_config
        _require(env.nx % cfg.grid_scale == 0 and env.ny % cfg.grid_scale == 0,
                 f"grid_scale {cfg.grid_scale} does not divide the {env.nx}x{env.ny} grid")
    if s.field.n_sub and s.field.kind is not FieldKind.LAPLACE:
        bound = (cfl_max_dt if s.field.kind is FieldKind.WAVE else diffusion_max_dt)(
            s.field.wave_speed, env.h)
        _require(s.dt / s.field.n_sub <= bound * (1.0 + 1e-12),
                 f"n_sub={s.field.n_sub} leaves sub-step {s.dt / s.field.n_sub:g} "
                 f"above the stability bound {bound:g}")
    return env


def _target_radius(scenario: Scenario, env: Environment) -> float:
    r = scenario.field.target_radius
    if r is None:
        r = max(env.h, scenario.capture_radius)
    return r


def _n_sub(scenario: Scenario, env: Environment) -> int:
    if scenario.field.n_sub:
        return scenario.field.n_sub
    if scenario.field.kind is FieldKind.WAVE:
        bound = cfl_max_dt(scenario.field.wave_speed, env.h)
    elif scenario.field.kind is FieldKind.DIFFUSION:
        bound = diffusion_max_dt(scenario.field.wave_speed, env.h)
    else:
        return 1
    return max(1, math.ceil(scenario.dt / (0.9 * bound)))


# -- integration ---------------------------------------------------------------


def _blocking_normal(env: Environment, x: float, y: float) -> np.ndarray | None:
    nx = ny = 0.0
    if x < 0.0:
        nx += 1.0
    elif x > env.width:
        nx -= 1.0
    if y < 0.0:
        ny += 1.0
    elif y > env.height:
        ny -= 1.0
    if nx or ny:
        n = math.hypot(nx, ny)
        return np.array([nx / n, ny / n])
    ix, iy = env.point_to_cell(x, y)
    try:
        return env.interface_normal(ix, iy)
    except (NotBoundaryCell, DegenerateNormal):
        return None


# unnormalized command magnitudes are clipped at this multiple of the
# configured speed; keeps single-tick displacements below obstacle thickness
_RAW_SPEED_CAP = 10.0


def integrate_with_collision(p: np.ndarray, v: np.ndarray, dt: float,
                             env: Environment) -> np.ndarray:
    """Euler step with one projection retry.

    A blocked candidate loses its velocity component along the blocking
    cell's normal and tries again; a second block keeps the agent in place.
    This is a safety net: a well-formed field never steers into a surface,
    which the analysis module checks separately.
    """
    cand = p + dt * v
    if env.in_free_space(cand[0], cand[1]):
        return cand
    normal = _blocking_normal(env, cand[0], cand[1])
    if normal is None:
        return p.copy()
    slide = v - (v @ normal) * normal
    cand = p + dt * slide
    if env.in_free_space(cand[0], cand[1]):
        return cand
    return p.copy()


# -- the game loop -------------------------------------------------------------


class _PursuerField:
    """Owns the pursuer's potential and its per-tick advancement."""

    def __init__(self, scenario: Scenario, env: Environment):
        self.cfg = scenario.field
        self.env = env
        self.radius = _target_radius(scenario, env)
        self.n_sub = _n_sub(scenario, env)
        self.dt = scenario.dt
        target = TargetFootprint(tuple(scenario.evader.start), self.radius)
        try:
            if self.cfg.kind is FieldKind.LAPLACE:
                self.field = self._solve(target, initial=None)
            else:
                self.field = make_time_field(
                    env, self.cfg.kind, target,
                    mode=self.cfg.boundary_mode, level=self.cfg.level,
                    wave_speed=self.cfg.wave_speed, damping=self.cfg.damping,
                    tol=self.cfg.tol, max_iters=self.cfg.max_iters,
                )
        except SolverFailure as e:
            raise SolverFailure(f"initial field solve failed: {e}", tick=0) from e

    def _solve(self, target: TargetFootprint, initial):
        return solve_laplace(
            self.env, target, mode=self.cfg.boundary_mode, level=self.cfg.level,
            tol=self.cfg.tol, max_iters=self.cfg.max_iters, initial=initial,
        )

    def advance(self, tick: int, evader_pos: np.ndarray):
        target = TargetFootprint((float(evader_pos[0]), float(evader_pos[1])), self.radius)
        try:
            if self.cfg.kind is FieldKind.LAPLACE:
                self.field = self._solve(target, initial=self.field.values)
            else:
                start = self.field.values.copy()
                reset_for_target(self.field, self.env, self.field.target, target)
                sub = self.dt / self.n_sub
                stepper = step_wave if self.cfg.kind is FieldKind.WAVE else step_diffusion
                for _ in range(self.n_sub):
                    stepper(self.field, self.env, target, sub)
                # guidance reads the change per target update, not per sub-step
                self.field.set_rate_reference(start, self.dt)
        except SolverFailure as e:
            raise SolverFailure(f"field advance failed at tick {tick}: {e}", tick=tick) from e
        # tick boundaries own the clock; sub-step accumulation must not drift
        self.field.t = tick * self.dt


def _evader_command(scenario: Scenario, env: Environment, state: AgentState,
                    pursuer_pos: np.ndarray, t: float) -> np.ndarray:
    tag = scenario.evader.strategy
    if tag is StrategyTag.EVADER_SCRIPTED:
        return evader_scripted_step(state, t, scenario.evader.path)
    if tag is StrategyTag.EVADER_HARMONIC:
        return evader_harmonic_step(state, pursuer_pos, env, scenario.evader.field_config)
    params = scenario.evader.random_params
    if params is None:
        params = RandomEvaderParams(rng_seed=scenario.rng_seed)
    return evader_random_step(state, pursuer_pos, env, params, scenario.dt,
                              scenario.evader.field_config)


def run_game(scenario: Scenario, env: Environment | None = None) -> GameTrace:
    env = validate_scenario(scenario, env)
    n_ticks = math.ceil(scenario.duration / scenario.dt)
    pursuer = AgentState(np.array(scenario.pursuer.start), scenario.pursuer.speed,
                         scenario.pursuer.strategy)
    evader = AgentState(np.array(scenario.evader.start), scenario.evader.speed,
                        scenario.evader.strategy)
    field_evader = scenario.evader.strategy in (
        StrategyTag.EVADER_HARMONIC, StrategyTag.EVADER_RANDOM)

    pf = _PursuerField(scenario, env)
    if field_evader:
        refresh_evader_field(evader, env, pursuer.position, scenario.evader.field_config)

    rows = {name: [] for name in (
        "t", "pursuer", "evader", "distance", "command", "potential",
        "grad_sq", "dvdt", "cmd_grad_sq", "cmd_dvdt",
        "clearance_p", "clearance_e", "captured")}

    def record(tick: int, command: np.ndarray, cmd_grad_sq: float,
               cmd_dvdt: float) -> bool:
        dist = float(np.hypot(*(pursuer.position - evader.position)))
        x, y = pursuer.position
        grad = sample_gradient(pf.field, x, y)
        rows["t"].append(tick * scenario.dt)
        rows["pursuer"].append(pursuer.position.copy())
        rows["evader"].append(evader.position.copy())
        rows["distance"].append(dist)
        rows["command"].append(command)
        rows["potential"].append(sample_potential(pf.field, x, y))
        rows["grad_sq"].append(float(grad @ grad))
        rows["dvdt"].append(sample_time_derivative(pf.field, x, y))
        rows["cmd_grad_sq"].append(cmd_grad_sq)
        rows["cmd_dvdt"].append(cmd_dvdt)
        rows["clearance_p"].append(env.signed_clearance(x, y))
        rows["clearance_e"].append(env.signed_clearance(*evader.position))
        captured = dist <= scenario.capture_radius
        rows["captured"].append(captured)
        return captured

    g0 = sample_gradient(pf.field, *pursuer.position)
    captured = record(0, np.zeros(2), float(g0 @ g0),
                      sample_time_derivative(pf.field, *pursuer.position))
    tick = 0
    while tick < n_ticks and not (captured and scenario.stop_on_capture):
        tick += 1
        pf.advance(tick, evader.position)
        if field_evader:
            refresh_evader_field(evader, env, pursuer.position, scenario.evader.field_config)
        x, y = pursuer.position
        cmd = guidance_regularized(pf.field, x, y, scenario.pursuer.regularizer)
        if scenario.pursuer.strategy is StrategyTag.PURSUER_WAVE:
            raw = cmd.velocity
        else:
            raw = -sample_gradient(pf.field, x, y)
        if scenario.pursuer.strategy is StrategyTag.PURSUER_HARMONIC_DUEL:
            vp = pursuer_duel_step(pursuer, evader.position, env,
                                   scenario.pursuer.planner)
        elif scenario.pursuer.normalize:
            vp = pursuer_step(pursuer, pf.field, scenario.pursuer.regularizer)
        else:
            # unnormalized commands can spike near the regularizer floor;
            # cap the magnitude so one tick cannot jump across an obstacle
            vp = raw
            mag = float(np.hypot(vp[0], vp[1]))
            cap = _RAW_SPEED_CAP * scenario.pursuer.speed
            if mag > cap:
                vp = vp * (cap / mag)
        ve = _evader_command(scenario, env, evader, pursuer.position, (tick - 1) * scenario.dt)
        pursuer.position = integrate_with_collision(pursuer.position, vp, scenario.dt, env)
        evader.position = integrate_with_collision(evader.position, ve, scenario.dt, env)
        captured = record(tick, vp, cmd.grad_sq, cmd.dvdt)

    trace = GameTrace(
        t=np.array(rows["t"]),
        pursuer=np.array(rows["pursuer"]),
        evader=np.array(rows["evader"]),
        distance=np.array(rows["distance"]),
        command=np.array(rows["command"]),
        potential=np.array(rows["potential"]),
        grad_sq=np.array(rows["grad_sq"]),
        dvdt=np.array(rows["dvdt"]),
        cmd_grad_sq=np.array(rows["cmd_grad_sq"]),
        cmd_dvdt=np.array(rows["cmd_dvdt"]),
        clearance_p=np.array(rows["clearance_p"]),
        clearance_e=np.array(rows["clearance_e"]),
        captured=np.array(rows["captured"], dtype=bool),
        metadata={
            "scenario": scenario.name,
            "hash": scenario_digest(scenario),
            "seed": scenario.rng_seed,
            "version": __version__,
            "backend": backend_name,
            "capture_radius": scenario.capture_radius,
            "dt": scenario.dt,
        },
    )
    return trace


def check_capture(trace: GameTrace, capture_radius: float | None = None,
                  lock_threshold: float | None = None) -> CaptureReport:
    """Capture statistics of a finished trace.

    The lock fraction counts rows in the last fifth of the trace whose
    relative distance stays at or below lock_threshold (defaults to the
    capture radius); it is the steady-state hold metric for duels that are
    run without early stopping.
    """
    if len(trace) == 0:
        raise ValidationError("empty trace")
    if capture_radius is None:
        capture_radius = float(trace.metadata.get("capture_radius", 0.25))
    if lock_threshold is None:
        lock_threshold = capture_radius
    dist = trace.distance
    hits = np.flatnonzero(dist <= capture_radius)
    first = int(hits[0]) if hits.size else None
    tail = max(1, math.ceil(0.2 * len(dist)))
    lock = float(np.mean(dist[-tail:] <= lock_threshold))
    return CaptureReport(
        captured=first is not None,
        first_capture_tick=first,
        final_distance=float(dist[-1]),
        lock_fraction=lock,
        capture_radius=capture_radius,
        lock_threshold=lock_threshold,
    )
