"""Pursuer and evader behaviors.

Pursuers descend a potential field: the steady and diffusion variants follow
the plain negative gradient, the wave variant adds the time-derivative
feed-through via the regularized law. Evaders either follow a script, descend
their own collision-risk field away from the pursuer, or sample random
headings gated by that risk.

The evader's risk field is a fixed-horizon diffusion of a threat indicator
(obstacles, walls, and a disk around the pursuer held at 1), built on a
coarsened copy of the workspace grid. A steady Dirichlet solve with every
source at the same level is constant on the interior and carries no
information, so the time-limited spread is what gives the evader a usable
directional signal; values stay in [0, 1] and read directly as risk.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .environment import Environment, EnvironmentSpec, build_environment
from .errors import FieldKindMismatch, QueryInObstacle, ValidationError
from .fields import (
    FieldKind,
    PotentialField,
    TargetFootprint,
    occupancy_field,
    solve_laplace,
)
from .guidance import (
    RegularizerParams,
    guidance_regularized,
    normalize_command,
    sample_gradient,
    sample_potential,
)


class StrategyTag(Enum):
    PURSUER_WAVE = "wave"
    PURSUER_DIFFUSION = "diffusion"
    PURSUER_LAPLACE = "laplace"
    PURSUER_HARMONIC_DUEL = "harmonic_duel"
    EVADER_SCRIPTED = "scripted"
    EVADER_HARMONIC = "harmonic"
    EVADER_RANDOM = "random"


PURSUER_TAGS = frozenset({
    StrategyTag.PURSUER_WAVE,
    StrategyTag.PURSUER_DIFFUSION,
    StrategyTag.PURSUER_LAPLACE,
    StrategyTag.PURSUER_HARMONIC_DUEL,
})
EVADER_TAGS = frozenset({
    StrategyTag.EVADER_SCRIPTED,
    StrategyTag.EVADER_HARMONIC,
    StrategyTag.EVADER_RANDOM,
})

# field kind each pursuer strategy expects in its snapshot
_PURSUER_FIELD_KIND = {
    StrategyTag.PURSUER_WAVE: FieldKind.WAVE,
    StrategyTag.PURSUER_DIFFUSION: FieldKind.DIFFUSION,
    StrategyTag.PURSUER_LAPLACE: FieldKind.LAPLACE,
    StrategyTag.PURSUER_HARMONIC_DUEL: FieldKind.LAPLACE,
}


@dataclass
class AgentState:
    position: np.ndarray
    speed: float
    strategy: StrategyTag
    scratch: dict = field(default_factory=dict)

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64).copy()
        if self.position.shape != (2,):
            raise ValidationError("position must be a 2-vector")
        if self.speed < 0.0:
            raise ValidationError(f"speed must be nonnegative, got {self.speed:g}")


class PathKind(Enum):
    STATIONARY = "stationary"
    LINEAR = "linear"
    LINEAR_SINUSOID = "linear_sinusoid"


@dataclass(frozen=True)
class ScriptedPath:
    kind: PathKind = PathKind.STATIONARY
    base_velocity: tuple[float, float] = (0.0, 0.0)
    amplitude: float = 0.0
    frequency: float = 0.0  # rad/s
    phase: float = 0.0

    def __post_init__(self):
        if self.kind is PathKind.LINEAR_SINUSOID:
            if math.hypot(*self.base_velocity) == 0.0:
                raise ValidationError("sinusoid path needs a nonzero base velocity")

    def _perp(self) -> np.ndarray:
        bx, by = self.base_velocity
        n = math.hypot(bx, by)
        return np.array([-by / n, bx / n])

    def velocity(self, t: float) -> np.ndarray:
        if self.kind is PathKind.STATIONARY:
            return np.zeros(2)
        v = np.array(self.base_velocity, dtype=np.float64)
        if self.kind is PathKind.LINEAR_SINUSOID:
            v = v + self._perp() * (
                self.amplitude * self.frequency * math.cos(self.frequency * t + self.phase)
            )
        return v

    def position(self, t: float, origin) -> np.ndarray:
        """Closed-form integral of velocity from the given start point."""
        p = np.asarray(origin, dtype=np.float64)
        if self.kind is PathKind.STATIONARY:
            return p.copy()
        p = p + np.array(self.base_velocity) * t
        if self.kind is PathKind.LINEAR_SINUSOID:
            swing = self.amplitude * (
                math.sin(self.frequency * t + self.phase) - math.sin(self.phase)
            )
            p = p + self._perp() * swing
        return p


@dataclass(frozen=True)
class RandomEvaderParams:
    risk_level: float = 0.6
    d_safe: float = 4.0
    candidate_count: int = 16
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.risk_level <= 1.0:
            raise ValidationError(f"risk_level must lie in [0, 1], got {self.risk_level:g}")
        if self.d_safe <= 0.0:
            raise ValidationError("d_safe must be positive")
        if self.candidate_count < 1:
            raise ValidationError("candidate_count must be at least 1")


@dataclass(frozen=True)
class EvaderFieldConfig:
    """How the evader builds its collision-risk field.

    grid_scale coarsens the workspace grid (the evader does not need the
    pursuer's resolution); pursuer_disk_radius defaults to two coarse cells.
    """

    d_safe: float = 4.0
    grid_scale: int = 2
    pursuer_disk_radius: float | None = None
    refresh_every: int = 1
    horizon: float = 4.0
    diffusivity: float = 1.0

    def __post_init__(self):
        if self.d_safe <= 0.0:
            raise ValidationError("d_safe must be positive")
        if self.grid_scale < 1:
            raise ValidationError("grid_scale must be at least 1")
        if self.refresh_every < 1:
            raise ValidationError("refresh_every must be at least 1")
        if self.horizon <= 0.0 or self.diffusivity <= 0.0:
            raise ValidationError("horizon and diffusivity must be positive")


# -- pursuer -------------------------------------------------------------------


def pursuer_step(
    state: AgentState,
    field_snapshot: PotentialField,
    regularizer: RegularizerParams = RegularizerParams(),
) -> np.ndarray:
    """Velocity command for one tick, normalized to the agent's speed.

    Steady and diffusion strategies follow -grad V; the wave strategy routes
    through the regularized law so the transient term participates. A zero
    gradient yields a zero command.
    """
    want = _PURSUER_FIELD_KIND.get(state.strategy)
    if want is None:
        raise ValidationError(f"{state.strategy} is not a pursuer strategy")
    if field_snapshot.kind is not want:
        raise FieldKindMismatch(
            f"strategy {state.strategy.value} needs a {want.value} field, "
            f"got {field_snapshot.kind.value}"
        )
    x, y = state.position
    if state.strategy is StrategyTag.PURSUER_WAVE:
        g = guidance_regularized(field_snapshot, x, y, regularizer).velocity
    else:
        g = -sample_gradient(field_snapshot, x, y)
    return normalize_command(g, state.speed)


def pursuer_duel_step(
    state: AgentState,
    evader_pos,
    env: Environment,
    config: "EvaderFieldConfig",
) -> np.ndarray:
    """Classic-planner pursuit for duels: descend a steady solve computed with
    the same machinery the evader plans with.

    The field lives on the shared coarse raster and is rebuilt every
    refresh_every calls, so between rebuilds the pursuer drives toward a stale
    stamp of the evader. The opponent stamp reuses pursuer_disk_radius; both
    sides of the duel plan with one config.
    """
    scratch = state.scratch
    coarse = scratch.get("duel_env")
    if coarse is None:
        coarse = build_evader_environment(env, config.grid_scale)
        scratch["duel_env"] = coarse
    tick = scratch.get("duel_tick", 0)
    if "duel_field" not in scratch or tick % config.refresh_every == 0:
        r_t = config.pursuer_disk_radius
        if r_t is None:
            r_t = 2.0 * coarse.h
        target = TargetFootprint((float(evader_pos[0]), float(evader_pos[1])), r_t)
        fld = solve_laplace(coarse, target, initial=scratch.get("duel_values"))
        scratch["duel_field"] = fld
        scratch["duel_values"] = fld.values
    scratch["duel_tick"] = tick + 1
    field_snapshot: PotentialField = scratch["duel_field"]
    x, y = state.position
    try:
        g = sample_gradient(field_snapshot, x, y)
    except QueryInObstacle:
        # coarse raster can swallow the pursuer's cell near a rim; head
        # straight at the stamp until the next rebuild sees free space
        chase = np.asarray(evader_pos, dtype=np.float64) - state.position
        return normalize_command(chase, state.speed)
    return normalize_command(-g, state.speed)


# -- scripted evader -----------------------------------------------------------


def evader_scripted_step(state: AgentState, t: float, path: ScriptedPath) -> np.ndarray:
    """Scripted velocity, taken as-is (scripts are not speed-normalized)."""
    if t < 0.0:
        raise ValidationError("time must be nonnegative")
    return path.velocity(t)


# -- risk field ----------------------------------------------------------------


def build_evader_environment(env: Environment, grid_scale: int) -> Environment:
    """Same workspace rasterized at grid_scale times the cell size."""
    if grid_scale == 1:
        return env
    if env.nx % grid_scale or env.ny % grid_scale:
        raise ValidationError(
            f"grid_scale {grid_scale} does not divide the {env.nx}x{env.ny} grid"
        )
    coarse = EnvironmentSpec(env.width, env.height, env.h * grid_scale, env.spec.obstacles)
    return build_environment(coarse)


def _disk_mask(env: Environment, center, radius: float) -> np.ndarray:
    ni, nj = env.cells.shape
    ii, jj = np.indices((ni, nj))
    dx = (ii - 0.5) * env.h - center[0]
    dy = (jj - 0.5) * env.h - center[1]
    return dx * dx + dy * dy <= radius * radius


def refresh_evader_field(
    state: AgentState,
    env: Environment,
    pursuer_pos,
    config: EvaderFieldConfig = EvaderFieldConfig(),
) -> PotentialField:
    """Rebuild the risk field every refresh_every calls (always on the first).

    The field lives in the agent's scratch so strategies can read it without
    re-deriving; call once per game tick.
    """
    scratch = state.scratch
    risk_env = scratch.get("risk_env")
    if risk_env is None:
        risk_env = build_evader_environment(env, config.grid_scale)
        scratch["risk_env"] = risk_env
    tick = scratch.get("risk_tick", 0)
    if "risk" not in scratch or tick % config.refresh_every == 0:
        r_p = config.pursuer_disk_radius
        if r_p is None:
            r_p = 2.0 * risk_env.h
        clamp = _disk_mask(risk_env, pursuer_pos, r_p)
        scratch["risk"] = occupancy_field(risk_env, clamp, config.horizon, config.diffusivity)
    scratch["risk_tick"] = tick + 1
    return scratch["risk"]


def _risk_descent(state: AgentState, pursuer_pos) -> np.ndarray:
    risk: PotentialField = state.scratch["risk"]
    x, y = state.position
    try:
        g = sample_gradient(risk, x, y)
    except QueryInObstacle:
        # the coarse raster can swallow a sliver of free space near a rim;
        # when that happens flee straight away from the pursuer
        flee = state.position - np.asarray(pursuer_pos, dtype=np.float64)
        return normalize_command(flee, state.speed)
    return normalize_command(-g, state.speed)


def evader_harmonic_step(
    state: AgentState,
    pursuer_pos,
    env: Environment,
    config: EvaderFieldConfig = EvaderFieldConfig(),
) -> np.ndarray:
    """Descend the risk field when the pursuer is inside the safe separation
    distance; idle otherwise."""
    pp = np.asarray(pursuer_pos, dtype=np.float64)
    if math.hypot(*(state.position - pp)) >= config.d_safe:
        return np.zeros(2)
    if "risk" not in state.scratch:
        refresh_evader_field(state, env, pp, config)
    return _risk_descent(state, pp)


def evader_random_step(
    state: AgentState,
    pursuer_pos,
    env: Environment,
    params: RandomEvaderParams,
    dt: float,
    config: EvaderFieldConfig = EvaderFieldConfig(),
) -> np.ndarray:
    """Risk-gated random heading, held until it stops being safe.

    A committed heading is kept as long as its one-step lookahead stays in
    free space at or below the accepted risk, so the walk is ballistic
    between replans rather than diffusive. On a replan, candidate_count
    headings come from the seeded generator as one batch and the first
    acceptable one wins. Falls back to the descent behavior (with this
    strategy's own safe distance) when every candidate is rejected. Bitwise
    deterministic for a fixed seed: replan times are a deterministic
    function of the trajectory.
    """
    pp = np.asarray(pursuer_pos, dtype=np.float64)
    if "risk" not in state.scratch:
        refresh_evader_field(state, env, pp, config)
    risk: PotentialField = state.scratch["risk"]

    def acceptable(heading: np.ndarray) -> bool:
        look = state.position + heading * (state.speed * dt)
        if not (0.0 <= look[0] <= env.width and 0.0 <= look[1] <= env.height):
            return False
        if not env.free_mask[env.point_to_cell(look[0], look[1])]:
            return False
        try:
            return sample_potential(risk, look[0], look[1]) <= params.risk_level
        except QueryInObstacle:
            return False

    committed = state.scratch.get("heading")
    if committed is not None and acceptable(committed):
        return committed * state.speed
    rng = state.scratch.get("rng")
    if rng is None:
        rng = np.random.default_rng(params.rng_seed)
        state.scratch["rng"] = rng
    angles = rng.uniform(0.0, 2.0 * math.pi, params.candidate_count)
    for theta in angles:
        heading = np.array([math.cos(theta), math.sin(theta)])
        if acceptable(heading):
            state.scratch["heading"] = heading
            return heading * state.speed
    state.scratch.pop("heading", None)
    fallback = dataclasses.replace(config, d_safe=params.d_safe)
    return evader_harmonic_step(state, pp, env, fallback)
