"""Potential fields over the workspace grid and their solvers.

Three kinds share one storage layout and one 5-point stencil:

* LAPLACE    steady state, relaxed by red-black SOR until the largest
             per-cell update drops below tol,
* DIFFUSION  explicit first-order-in-time stepping,
* WAVE       leapfrog second-order-in-time stepping with optional linear
             damping -gamma*dt*(V - V_prev).

Boundary handling is either DIRICHLET (every non-free cell holds the wall
level C) or NEUMANN (cells on the free-space rim mirror the mean of their
free neighbors, so the first-order normal difference across the rim is zero).
The moving low spot is a clamped disk footprint: every free cell whose center
lies strictly within ``radius`` of the footprint center is held at 0 at both
time levels. Extra clamp sets (mask, level) serve internal sources such as
the evader's threat disk.

Time-dependent fields warm-start from the steady solve in Dirichlet mode and
from the uniform ambient level C in Neumann mode (where the steady problem
with only a zero clamp degenerates to V = 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels
from .environment import Environment
from .errors import (
    FieldKindMismatch,
    MissingPreviousStep,
    NoConvergence,
    TargetInsideObstacle,
    UnstableTimeStep,
    ValidationError,
)


class FieldKind(Enum):
    LAPLACE = "laplace"
    DIFFUSION = "diffusion"
    WAVE = "wave"


class BoundaryMode(Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


@dataclass(frozen=True)
class TargetFootprint:
    """Disk of cells clamped to zero around the target point."""

    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not (self.radius > 0.0 and math.isfinite(self.radius)):
            raise ValidationError("footprint radius must be positive")


DEFAULT_OMEGA = 1.8
MAX_ITERS = 20000


def default_damping(wave_speed: float, env: Environment) -> float:
    return 0.5 * wave_speed / env.diagonal


def cfl_max_dt(wave_speed: float, h: float) -> float:
    """Largest stable leapfrog step for the 2-D 5-point stencil."""
    return h / (wave_speed * math.sqrt(2.0))


def diffusion_max_dt(wave_speed: float, h: float) -> float:
    """Largest stable explicit diffusion step (diffusivity = wave_speed**2)."""
    return h * h / (4.0 * wave_speed * wave_speed)


class PotentialField:
    """One scalar field plus the clamp bookkeeping needed to advance it.

    Mutated in place by the step/reset operations; exactly one owner should
    mutate an instance. Hand copies (``field.copy()``) to anything that must
    observe a frozen snapshot.
    """

    def __init__(
        self,
        env: Environment,
        kind: FieldKind,
        mode: BoundaryMode,
        level: float,
        values: np.ndarray,
        target: TargetFootprint | None,
        wave_speed: float = 1.0,
        damping: float = 0.0,
        extra_clamps: tuple[tuple[np.ndarray, float], ...] = (),
    ):
        self.env = env
        self.kind = kind
        self.mode = mode
        self.level = level
        self.wave_speed = wave_speed
        self.damping = damping
        self.h = env.h
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        self.prev_values = self.values.copy()
        self.t = 0.0
        self.last_dt: float | None = None
        self.extra_clamps = tuple((m.astype(bool), float(v)) for m, v in extra_clamps)
        self.version = 0
        self.target: TargetFootprint | None = None
        self.target_mask = np.zeros_like(env.free_mask)
        self._set_target(target)

    # -- masks ------------------------------------------------------------

    def _set_target(self, target: TargetFootprint | None):
        env = self.env
        if target is not None:
            if target.radius < env.h:
                raise ValidationError(
                    f"footprint radius {target.radius:g} below cell size {env.h:g}"
                )
            self.target_mask = footprint_mask(env, target)
        else:
            self.target_mask = np.zeros_like(env.free_mask)
        self.target = target
        clamped = self.target_mask.copy()
        for mask, _ in self.extra_clamps:
            clamped |= mask
        update = env.free_mask & ~clamped
        ii, jj = np.indices(update.shape)
        parity = (ii + jj) % 2 == 0
        self.update_u8 = np.ascontiguousarray(update, dtype=np.uint8)
        self.red_u8 = np.ascontiguousarray(update & parity, dtype=np.uint8)
        self.black_u8 = np.ascontiguousarray(update & ~parity, dtype=np.uint8)
        self.version += 1

    def apply_clamps(self, arr: np.ndarray):
        env = self.env
        if self.mode is BoundaryMode.DIRICHLET:
            arr[~env.free_mask] = self.level
        else:
            arr[~env.free_mask & ~env.interface_mask] = self.level
            _refresh_ghosts(arr, env)
        for mask, value in self.extra_clamps:
            arr[mask] = value
        arr[self.target_mask] = 0.0

    def refresh_ghosts(self):
        if self.mode is BoundaryMode.NEUMANN:
            _refresh_ghosts(self.values, self.env)
            _refresh_ghosts(self.prev_values, self.env)

    def set_rate_reference(self, reference: np.ndarray, interval: float):
        """Report the time derivative against an external baseline.

        Sub-steps taken between target updates carry fast solver transients;
        the rate that matters to guidance is the change per update interval,
        so callers that sub-step hand in the values snapshot from the start
        of the interval. Cleared by the next solver step.
        """
        if interval <= 0.0:
            raise ValidationError("rate interval must be positive")
        self._rate_grid = (self.values - reference) / interval
        self._rate_version = self.version

    # -- convenience -------------------------------------------------------

    def copy(self) -> "PotentialField":
        dup = object.__new__(PotentialField)
        dup.__dict__.update(self.__dict__)
        dup.values = self.values.copy()
        dup.prev_values = self.prev_values.copy()
        return dup

    def as_kind(self, kind: FieldKind, wave_speed: float | None = None,
                damping: float | None = None) -> "PotentialField":
        self.kind = kind
        if wave_speed is not None:
            self.wave_speed = wave_speed
        if damping is not None:
            self.damping = damping
        return self


def footprint_mask(env: Environment, target: TargetFootprint) -> np.ndarray:
    """Free cells whose centers lie strictly inside the footprint disk.

    The strict inequality keeps a radius-h footprint to the single cell that
    contains the center. The center cell itself is always within h*sqrt(2)/2
    of the point, so at least one cell is clamped whenever radius >= h.
    """
    cx, cy = target.center
    ix, iy = env.point_to_cell(cx, cy)  # raises OutOfBounds outside the workspace
    if not env.free_mask[ix, iy]:
        raise TargetInsideObstacle(f"footprint center ({cx:g}, {cy:g}) is not in free space")
    xs = (np.arange(env.nx + 2) - 0.5) * env.h
    ys = (np.arange(env.ny + 2) - 0.5) * env.h
    d2 = (xs[:, None] - cx) ** 2 + (ys[None, :] - cy) ** 2
    # shrink by a relative epsilon so centers at exactly radius distance stay
    # out regardless of rounding (radius h must clamp one cell, not five)
    return (d2 < target.radius**2 * (1.0 - 1e-9)) & env.free_mask


def _refresh_ghosts(arr: np.ndarray, env: Environment):
    """Mirror boundary: rim cells take the mean of their free 4-neighbors."""
    free = env.free_mask
    f = free.astype(np.float64)
    num = np.zeros_like(arr)
    den = np.zeros_like(arr)
    num[1:, :] += arr[:-1, :] * f[:-1, :]
    den[1:, :] += f[:-1, :]
    num[:-1, :] += arr[1:, :] * f[1:, :]
    den[:-1, :] += f[1:, :]
    num[:, 1:] += arr[:, :-1] * f[:, :-1]
    den[:, 1:] += f[:, :-1]
    num[:, :-1] += arr[:, 1:] * f[:, 1:]
    den[:, :-1] += f[:, 1:]
    rim = env.interface_mask
    arr[rim] = num[rim] / den[rim]


# -- construction and solving ---------------------------------------------


def solve_laplace(
    env: Environment,
    target: TargetFootprint | None,
    *,
    mode: BoundaryMode = BoundaryMode.DIRICHLET,
    level: float = 1.0,
    tol: float | None = None,
    max_iters: int = MAX_ITERS,
    omega: float = DEFAULT_OMEGA,
    initial: np.ndarray | None = None,
    extra_clamps: tuple[tuple[np.ndarray, float], ...] = (),
) -> PotentialField:
    """Relax the steady field to within ``tol`` (default 1e-6 * level).

    ``initial`` warm-starts the sweep (the quasi-stationary pursuer re-solves
    every tick from the previous tick's field). Raises NoConvergence with the
    final residual when max_iters is exhausted.
    """
    if tol is None:
        tol = 1e-6 * abs(level) if level != 0.0 else 1e-6
    if initial is None:
        values = np.full((env.nx + 2, env.ny + 2), float(level))
    else:
        values = np.array(initial, dtype=np.float64)
    field = PotentialField(env, FieldKind.LAPLACE, mode, level, values, target,
                           extra_clamps=extra_clamps)
    field.apply_clamps(field.values)
    residual = math.inf
    for _ in range(max_iters):
        if mode is BoundaryMode.NEUMANN:
            _refresh_ghosts(field.values, env)
        residual = kernels.sor_sweep(field.values, field.red_u8, field.black_u8, omega)
        if residual < tol:
            break
    else:
        raise NoConvergence(max_iters, residual)
    if mode is BoundaryMode.NEUMANN:
        _refresh_ghosts(field.values, env)
    field.prev_values = field.values.copy()
    field.version += 1
    return field


def make_time_field(
    env: Environment,
    kind: FieldKind,
    target: TargetFootprint | None,
    *,
    mode: BoundaryMode = BoundaryMode.DIRICHLET,
    level: float = 1.0,
    wave_speed: float = 1.0,
    damping: float | None = None,
    tol: float | None = None,
    omega: float = DEFAULT_OMEGA,
    max_iters: int = MAX_ITERS,
) -> PotentialField:
    """Warm-started diffusion or wave field (see module docstring)."""
    if kind is FieldKind.LAPLACE:
        raise FieldKindMismatch("use solve_laplace for steady fields")
    if damping is None:
        damping = default_damping(wave_speed, env) if kind is FieldKind.WAVE else 0.0
    if mode is BoundaryMode.DIRICHLET:
        field = solve_laplace(env, target, mode=mode, level=level, tol=tol,
                              omega=omega, max_iters=max_iters)
        field.as_kind(kind, wave_speed=wave_speed, damping=damping)
        return field
    values = np.full((env.nx + 2, env.ny + 2), float(level))
    field = PotentialField(env, kind, mode, level, values, target,
                           wave_speed=wave_speed, damping=damping)
    field.apply_clamps(field.values)
    field.apply_clamps(field.prev_values)
    return field


def field_from_values(
    env: Environment,
    values: np.ndarray,
    *,
    kind: FieldKind = FieldKind.LAPLACE,
    mode: BoundaryMode = BoundaryMode.DIRICHLET,
    level: float = 1.0,
    target: TargetFootprint | None = None,
    wave_speed: float = 1.0,
    damping: float = 0.0,
    prev_values: np.ndarray | None = None,
    last_dt: float | None = None,
) -> PotentialField:
    """Wrap explicit arrays (analytic injections in tests, fixtures)."""
    field = PotentialField(env, kind, mode, level, values, target,
                           wave_speed=wave_speed, damping=damping)
    if prev_values is not None:
        field.prev_values = np.ascontiguousarray(prev_values, dtype=np.float64)
        field.last_dt = last_dt
    return field


# -- time stepping ----------------------------------------------------------


def reset_for_target(
    field: PotentialField,
    env: Environment,
    old_target: TargetFootprint | None,
    new_target: TargetFootprint | None,
) -> PotentialField:
    """Move the zero clamp. Released cells keep their last value (zero) and
    evolve freely from the next step on; newly clamped cells are zeroed at
    both time levels."""
    if new_target == field.target:
        return field
    field._set_target(new_target)
    field.values[field.target_mask] = 0.0
    field.prev_values[field.target_mask] = 0.0
    return field


def step_diffusion(
    field: PotentialField,
    env: Environment,
    target: TargetFootprint | None,
    dt: float,
    *,
    enforce_stability: bool = True,
) -> PotentialField:
    if field.kind is not FieldKind.DIFFUSION:
        raise FieldKindMismatch(f"step_diffusion on a {field.kind.value} field")
    bound = diffusion_max_dt(field.wave_speed, field.h)
    if enforce_stability and dt > bound * (1.0 + 1e-12):
        raise UnstableTimeStep(dt, bound)
    if target != field.target:
        reset_for_target(field, env, field.target, target)
    field.refresh_ghosts()
    r = dt * field.wave_speed**2 / (field.h * field.h)
    out = field.values.copy()
    kernels.diffusion_step(field.values, out, field.update_u8, r)
    field.prev_values = field.values
    field.values = out
    if field.mode is BoundaryMode.NEUMANN:
        _refresh_ghosts(field.values, env)
    field.t += dt
    field.last_dt = dt
    field.version += 1
    return field


def step_wave(
    field: PotentialField,
    env: Environment,
    target: TargetFootprint | None,
    dt: float,
    *,
    enforce_stability: bool = True,
) -> PotentialField:
    if field.kind is not FieldKind.WAVE:
        raise FieldKindMismatch(f"step_wave on a {field.kind.value} field")
    if field.prev_values is None:
        raise MissingPreviousStep("wave step needs two time levels")
    bound = cfl_max_dt(field.wave_speed, field.h)
    if enforce_stability and dt > bound * (1.0 + 1e-12):
        raise UnstableTimeStep(dt, bound)
    if target != field.target:
        reset_for_target(field, env, field.target, target)
    field.refresh_ghosts()
    c2 = (field.wave_speed * dt / field.h) ** 2
    gdt = field.damping * dt
    out = field.values.copy()
    kernels.wave_step(field.values, field.prev_values, out, field.update_u8, c2, gdt)
    field.prev_values = field.values
    field.values = out
    if field.mode is BoundaryMode.NEUMANN:
        _refresh_ghosts(field.values, env)
    field.t += dt
    field.last_dt = dt
    field.version += 1
    return field


def time_derivative(field: PotentialField) -> np.ndarray:
    """Per-cell backward difference (V - V_prev) / dt of the last step.

    Zero on Dirichlet rim cells by construction (both levels hold C there).
    """
    if field.prev_values is None or field.last_dt is None:
        raise MissingPreviousStep("field has not taken a time step")
    return (field.values - field.prev_values) / field.last_dt


def wave_energy(field: PotentialField) -> float:
    """Discrete energy: kinetic term over free cells plus a**2 times the
    squared link differences. Conserved to O(dt**2) by the undamped leapfrog."""
    if field.last_dt is None:
        raise MissingPreviousStep("energy needs a completed step")
    v, p = field.values, field.prev_values
    free = field.env.free_mask
    kin = float((((v - p)[free] / field.last_dt) ** 2).sum())
    either_x = free[:-1, :] | free[1:, :]
    either_y = free[:, :-1] | free[:, 1:]
    dx = (v[1:, :] - v[:-1, :])[either_x]
    dy = (v[:, 1:] - v[:, :-1])[either_y]
    grad = float((dx**2).sum() + (dy**2).sum()) / field.h**2
    return kin + field.wave_speed**2 * grad


def occupancy_field(
    env: Environment,
    clamp_mask: np.ndarray,
    horizon: float,
    diffusivity_speed: float = 1.0,
) -> PotentialField:
    """Fixed-horizon diffusion of a threat indicator.

    Cells in ``clamp_mask`` plus every non-free cell are held at 1; everything
    else starts at 0 and diffuses for ``horizon`` seconds. The result lies in
    [0, 1], is ~1 at the threat set, and decays with distance, so it reads as
    a short-horizon collision risk. Returned as a static field (no time
    derivative) for gradient sampling.
    """
    clamp = clamp_mask & env.free_mask
    values = np.zeros((env.nx + 2, env.ny + 2))
    values[~env.free_mask] = 1.0
    values[clamp] = 1.0
    field = PotentialField(
        env, FieldKind.DIFFUSION, BoundaryMode.DIRICHLET, 1.0, values, None,
        wave_speed=diffusivity_speed, extra_clamps=((clamp, 1.0),),
    )
    r = 0.225  # safely below the 0.25 explicit-stability limit
    dt = r * env.h * env.h / diffusivity_speed**2
    steps = max(1, math.ceil(horizon / dt))
    for _ in range(steps):
        out = field.values.copy()
        kernels.diffusion_step(field.values, out, field.update_u8, r)
        field.values = out
    field.prev_values = field.values.copy()
    field.last_dt = None
    field.t = horizon
    field.version += 1
    return field


# -- serialization -----------------------------------------------------------


def dump_grid(field: PotentialField, path):
    """Write the current values as CSV with a one-line header comment."""
    env = field.env
    with open(path, "w") as fh:
        fh.write(
            f"# width={env.width!r} height={env.height!r} h={env.h!r} "
            f"t={field.t!r} kind={field.kind.value} mode={field.mode.value}\n"
        )
        for row in field.values:
            fh.write(",".join(repr(v) for v in row) + "\n")


def load_grid(path) -> tuple[dict, np.ndarray]:
    """Read back a dump_grid file: (header dict, values array)."""
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# "):
            raise ValidationError("grid file lacks its header line")
        meta = {}
        for part in header[2:].split():
            key, _, raw = part.partition("=")
            meta[key] = raw
        rows = [list(map(float, line.split(","))) for line in fh if line.strip()]
    return meta, np.array(rows)
