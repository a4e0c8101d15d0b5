"""Field solvers: steady relaxation, explicit stepping, stability, clamps."""

from __future__ import annotations

import math

import numpy as np
import pytest

from wavepursuit.environment import EnvironmentSpec, Rect, build_environment
from wavepursuit.errors import (
    FieldKindMismatch,
    MissingPreviousStep,
    NoConvergence,
    TargetInsideObstacle,
    UnstableTimeStep,
    ValidationError,
)
from wavepursuit.fields import (
    BoundaryMode,
    FieldKind,
    PotentialField,
    TargetFootprint,
    cfl_max_dt,
    diffusion_max_dt,
    field_from_values,
    footprint_mask,
    make_time_field,
    occupancy_field,
    reset_for_target,
    solve_laplace,
    step_diffusion,
    step_wave,
    time_derivative,
    wave_energy,
)


def small_env(n=6, h=0.1):
    return build_environment(EnvironmentSpec(n * h, n * h, h))


def center_target(env, radius=None):
    # center of the cell nearest the workspace middle, so footprints are
    # unambiguous even on even-sized grids
    ix = env.nx // 2
    cx, cy = env.cell_center(ix, ix)
    return TargetFootprint((cx, cy), radius if radius is not None else env.h)


# -- footprints ---------------------------------------------------------------


def test_footprint_radius_h_is_single_cell():
    env = small_env()
    mask = footprint_mask(env, center_target(env))
    assert mask.sum() == 1


def test_footprint_radius_2h_is_nine_cells():
    env = small_env(8)
    mask = footprint_mask(env, center_target(env, 2 * env.h))
    # strict < 2h keeps the center, the 4 edge neighbors and the 4 diagonals
    assert mask.sum() == 9


def test_footprint_below_h_rejected():
    env = small_env()
    with pytest.raises(ValidationError):
        solve_laplace(env, TargetFootprint((0.25, 0.25), 0.5 * env.h))


def test_footprint_in_obstacle_rejected():
    env = build_environment(EnvironmentSpec(1.0, 1.0, 0.1, (Rect(0.4, 0.4, 0.6, 0.6),)))
    with pytest.raises(TargetInsideObstacle):
        footprint_mask(env, TargetFootprint((0.5, 0.5), 0.1))


# -- steady solve -------------------------------------------------------------


def dense_laplace_oracle(env, field):
    """Assemble and solve the clamped 5-point system directly."""
    free = env.free_mask
    unknown = free & ~field.target_mask
    for mask, _ in field.extra_clamps:
        unknown &= ~mask
    idx = {cell: k for k, cell in enumerate(zip(*np.nonzero(unknown)))}
    n = len(idx)
    A = np.zeros((n, n))
    b = np.zeros(n)
    fixed = field.values.copy()  # clamped entries are already final
    for (i, j), k in idx.items():
        A[k, k] = 4.0
        for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            nb = (i + di, j + dj)
            if nb in idx:
                A[k, idx[nb]] = -1.0
            else:
                b[k] += fixed[nb]
    sol = np.linalg.solve(A, b)
    out = fixed.copy()
    for (i, j), k in idx.items():
        out[i, j] = sol[k]
    return out


def test_laplace_matches_dense_solve():
    env = small_env(6)
    tol = 1e-6
    field = solve_laplace(env, center_target(env), level=1.0, tol=tol)
    oracle = dense_laplace_oracle(env, field)
    assert np.abs(field.values - oracle).max() <= 10 * tol


def test_laplace_interior_strictly_inside_band():
    env = build_environment(EnvironmentSpec(3.2, 3.2, 0.1, (Rect(1.2, 1.2, 2.0, 2.0),)))
    field = solve_laplace(env, TargetFootprint((0.55, 0.55), 0.2))
    inner = env.free_mask & ~field.target_mask
    assert field.values[inner].min() > 0.0
    assert field.values[inner].max() < 1.0
    assert (field.values[field.target_mask] == 0.0).all()
    assert (field.values[~env.free_mask] == 1.0).all()


def test_laplace_linear_strip_with_mirrored_sides():
    # end columns clamped at 1 and 0, side walls mirrored: the interior
    # relaxes to an exactly linear 1-D profile
    env = build_environment(EnvironmentSpec(1.0, 0.3, 0.1))
    hot = np.zeros_like(env.free_mask)
    cold = np.zeros_like(env.free_mask)
    hot[1, 1:-1] = True
    cold[env.nx, 1:-1] = True
    tol = 1e-9
    field = solve_laplace(
        env, None, mode=BoundaryMode.NEUMANN, level=1.0, tol=tol,
        extra_clamps=((hot, 1.0), (cold, 0.0)),
    )
    expected = np.linspace(1.0, 0.0, env.nx)
    for iy in range(1, env.ny + 1):
        assert np.abs(field.values[1:-1, iy] - expected).max() <= 200 * tol


def test_laplace_no_convergence_reports_residual():
    env = small_env(12)
    with pytest.raises(NoConvergence) as err:
        solve_laplace(env, center_target(env), max_iters=3)
    assert err.value.residual > 0.0
    assert err.value.iterations == 3


def test_laplace_warm_start_converges_fast():
    env = small_env(24)
    first = solve_laplace(env, center_target(env))
    again = solve_laplace(env, center_target(env), initial=first.values)
    assert np.abs(first.values - again.values).max() < 1e-5


# -- stability bounds ---------------------------------------------------------


def test_stability_bound_values():
    assert cfl_max_dt(1.0, 0.1) == pytest.approx(0.1 / math.sqrt(2.0))
    assert cfl_max_dt(2.0, 0.1) == pytest.approx(cfl_max_dt(1.0, 0.1) / 2.0)
    assert diffusion_max_dt(1.0, 0.1) == pytest.approx(0.0025)


def test_unstable_steps_rejected():
    env = small_env(8)
    diff = make_time_field(env, FieldKind.DIFFUSION, center_target(env))
    with pytest.raises(UnstableTimeStep):
        step_diffusion(diff, env, diff.target, diffusion_max_dt(1.0, env.h) * 1.02)
    wave = make_time_field(env, FieldKind.WAVE, center_target(env))
    with pytest.raises(UnstableTimeStep):
        step_wave(wave, env, wave.target, cfl_max_dt(1.0, env.h) * 1.02)
    # exactly at the bound is accepted
    step_wave(wave, env, wave.target, cfl_max_dt(1.0, env.h))


def test_kind_mismatch_rejected():
    env = small_env(8)
    wave = make_time_field(env, FieldKind.WAVE, center_target(env))
    with pytest.raises(FieldKindMismatch):
        step_diffusion(wave, env, wave.target, 1e-3)


# -- single steps against hand stencils ---------------------------------------


def hand_diffusion(values, update, r):
    out = values.copy()
    for i in range(1, values.shape[0] - 1):
        for j in range(1, values.shape[1] - 1):
            if update[i, j]:
                v = values[i, j]
                s = ((values[i - 1, j] + values[i + 1, j]) + values[i, j - 1]) + values[i, j + 1]
                out[i, j] = v + r * (s - 4.0 * v)
    return out


def hand_wave(values, prev, update, c2, gdt):
    out = values.copy()
    for i in range(1, values.shape[0] - 1):
        for j in range(1, values.shape[1] - 1):
            if update[i, j]:
                v = values[i, j]
                p = prev[i, j]
                s = ((values[i - 1, j] + values[i + 1, j]) + values[i, j - 1]) + values[i, j + 1]
                out[i, j] = (2.0 * v - p) + c2 * (s - 4.0 * v) - gdt * (v - p)
    return out


def test_diffusion_step_matches_hand_stencil_exactly():
    env = small_env(8)
    rng = np.random.default_rng(2)
    values = np.full((10, 10), 1.0)
    values[1:-1, 1:-1] = rng.uniform(0.0, 1.0, (8, 8))
    tf = center_target(env)
    values[footprint_mask(env, tf)] = 0.0
    field = field_from_values(env, values, kind=FieldKind.DIFFUSION, target=tf)
    dt = 0.002
    expected = hand_diffusion(field.values.copy(), field.update_u8, dt / env.h**2)
    step_diffusion(field, env, tf, dt)
    assert np.array_equal(field.values, expected)
    assert field.last_dt == dt and field.t == dt


def test_cold_cell_rises_neighbors_fall():
    env = small_env(8)
    values = np.full((10, 10), 1.0)
    ix = 4
    values[ix, ix] = 0.0
    field = field_from_values(env, values, kind=FieldKind.DIFFUSION)
    step_diffusion(field, env, None, 0.002)
    assert field.values[ix, ix] > 0.0
    assert field.values[ix + 1, ix] < 1.0
    assert field.values[ix - 1, ix] < 1.0


def test_wave_step_matches_hand_stencil_exactly():
    env = small_env(8)
    rng = np.random.default_rng(4)
    values = np.full((10, 10), 1.0)
    prev = np.full((10, 10), 1.0)
    values[1:-1, 1:-1] = rng.uniform(0.0, 1.0, (8, 8))
    prev[1:-1, 1:-1] = rng.uniform(0.0, 1.0, (8, 8))
    tf = center_target(env)
    mask = footprint_mask(env, tf)
    values[mask] = 0.0
    prev[mask] = 0.0
    field = field_from_values(env, values, kind=FieldKind.WAVE, target=tf,
                              prev_values=prev, last_dt=0.05, damping=0.3)
    dt = 0.05
    c2 = (dt / env.h) ** 2
    expected = hand_wave(field.values.copy(), prev, field.update_u8, c2, 0.3 * dt)
    step_wave(field, env, tf, dt)
    assert np.array_equal(field.values, expected)


def test_uniform_field_is_a_fixed_point():
    env = small_env(8)
    values = np.full((10, 10), 1.0)
    diff = field_from_values(env, values.copy(), kind=FieldKind.DIFFUSION)
    step_diffusion(diff, env, None, 0.002)
    assert np.array_equal(diff.values, values)
    wave = field_from_values(env, values.copy(), kind=FieldKind.WAVE)
    step_wave(wave, env, None, 0.05)
    assert np.array_equal(wave.values, values)


# -- long-run behavior --------------------------------------------------------


def test_diffusion_relaxes_to_laplace():
    env = small_env(16)
    tf = center_target(env, 2 * env.h)
    values = np.full((18, 18), 1.0)
    values[footprint_mask(env, tf)] = 0.0
    field = field_from_values(env, values, kind=FieldKind.DIFFUSION, target=tf)
    dt = diffusion_max_dt(1.0, env.h) * 0.9
    for _ in range(int(40.0 / dt)):
        step_diffusion(field, env, tf, dt)
    steady = solve_laplace(env, tf)
    assert np.abs(field.values - steady.values).max() < 1e-3


def test_damped_wave_settles_to_laplace():
    env = small_env(16)
    tf = center_target(env, 2 * env.h)
    values = np.full((18, 18), 1.0)
    values[footprint_mask(env, tf)] = 0.0
    field = field_from_values(env, values, kind=FieldKind.WAVE, target=tf, damping=2.0)
    dt = cfl_max_dt(1.0, env.h) * 0.5
    for _ in range(4000):
        step_wave(field, env, tf, dt)
    steady = solve_laplace(env, tf)
    assert np.abs(field.values - steady.values).max() < 1e-3


def gaussian_bump_field(env, damping=0.0):
    xs = (np.arange(env.nx + 2) - 0.5) * env.h
    ys = (np.arange(env.ny + 2) - 0.5) * env.h
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    w, hgt = env.width, env.height
    values = np.exp(-((gx - w / 2) ** 2 + (gy - hgt / 2) ** 2) / (0.08 * w * hgt))
    values[~env.free_mask] = 0.0
    return field_from_values(env, values, kind=FieldKind.WAVE, level=0.0,
                             damping=damping)


def test_undamped_wave_conserves_energy():
    # dt well below the CFL bound: the backward-difference kinetic term in the
    # energy oscillates at O(omega*dt), so a generous margin keeps it under 1%
    env = build_environment(EnvironmentSpec(2.0, 2.0, 0.05))
    field = gaussian_bump_field(env)
    dt = cfl_max_dt(1.0, env.h) * 0.1
    step_wave(field, env, None, dt)
    e0 = wave_energy(field)
    worst = 0.0
    for _ in range(1000):
        step_wave(field, env, None, dt)
        worst = max(worst, abs(wave_energy(field) - e0) / e0)
    assert worst < 0.01


def test_cfl_sweep_detects_instability():
    # needs a grid large enough that the discrete spectrum approaches the
    # continuum limit; small Dirichlet grids are stable slightly above the bound
    env = build_environment(EnvironmentSpec(3.2, 3.2, 0.1))
    bound = cfl_max_dt(1.0, env.h)
    # just below: bounded for 2000 steps
    field = gaussian_bump_field(env)
    for _ in range(2000):
        step_wave(field, env, None, 0.99 * bound)
    assert np.abs(field.values).max() < 5.0
    # just above: blows past 10x the initial amplitude
    field = gaussian_bump_field(env)
    blew_up = False
    for _ in range(2000):
        step_wave(field, env, None, 1.01 * bound, enforce_stability=False)
        if np.abs(field.values).max() > 10.0:
            blew_up = True
            break
    assert blew_up


# -- target movement ----------------------------------------------------------


def test_reset_same_target_is_identity():
    env = small_env(12)
    tf = center_target(env)
    field = make_time_field(env, FieldKind.WAVE, tf)
    before = field.values.copy()
    reset_for_target(field, env, tf, TargetFootprint(tf.center, tf.radius))
    assert np.array_equal(field.values, before)


def test_reset_moves_clamp_and_released_cell_recovers():
    env = small_env(12)
    old = center_target(env)
    field = make_time_field(env, FieldKind.DIFFUSION, old)
    ox, oy = env.point_to_cell(*old.center)
    new = TargetFootprint((old.center[0] + env.h, old.center[1]), old.radius)
    reset_for_target(field, env, old, new)
    nx_, ny_ = env.point_to_cell(*new.center)
    assert field.target_mask[nx_, ny_] and not field.target_mask[ox, oy]
    # released cell keeps its last (zero) value until it evolves
    assert field.values[ox, oy] == 0.0
    assert field.values[nx_, ny_] == 0.0 and field.prev_values[nx_, ny_] == 0.0
    step_diffusion(field, env, new, diffusion_max_dt(1.0, env.h) * 0.9)
    assert field.values[ox, oy] > 0.0  # positive neighbors pull it up


def test_reset_into_obstacle_rejected():
    env = build_environment(EnvironmentSpec(1.2, 1.2, 0.1, (Rect(0.5, 0.5, 0.7, 0.7),)))
    field = make_time_field(env, FieldKind.WAVE, TargetFootprint((0.25, 0.25), 0.1))
    with pytest.raises(TargetInsideObstacle):
        reset_for_target(field, env, field.target, TargetFootprint((0.6, 0.6), 0.1))


# -- time derivative ----------------------------------------------------------


def test_time_derivative_before_any_step_raises():
    env = small_env(8)
    field = make_time_field(env, FieldKind.WAVE, center_target(env))
    with pytest.raises(MissingPreviousStep):
        time_derivative(field)


def test_time_derivative_matches_backward_difference():
    env = small_env(8)
    tf = center_target(env)
    field = make_time_field(env, FieldKind.WAVE, tf)
    step_wave(field, env, tf, 0.01)
    prev = field.values.copy()
    step_wave(field, env, tf, 0.02)
    expected = (field.values - prev) / 0.02
    assert np.array_equal(time_derivative(field), expected)
    # identical time levels give all zeros
    frozen = field_from_values(env, np.full((10, 10), 1.0), kind=FieldKind.WAVE,
                               prev_values=np.full((10, 10), 1.0), last_dt=0.02)
    assert (time_derivative(frozen) == 0.0).all()


def test_time_derivative_zero_on_dirichlet_rim():
    env = build_environment(EnvironmentSpec(1.6, 1.6, 0.1, (Rect(0.6, 0.6, 1.0, 1.0),)))
    tf = TargetFootprint((0.25, 0.25), 0.2)
    field = make_time_field(env, FieldKind.WAVE, tf)
    for _ in range(7):
        step_wave(field, env, tf, 0.05)
    dvdt = time_derivative(field)
    assert (dvdt[~env.free_mask] == 0.0).all()


# -- mirror boundaries --------------------------------------------------------


def test_neumann_ghosts_mirror_free_neighbors():
    env = build_environment(EnvironmentSpec(1.6, 1.6, 0.1, (Rect(0.6, 0.6, 1.0, 1.0),)))
    tf = TargetFootprint((0.25, 0.25), 0.2)
    field = make_time_field(env, FieldKind.WAVE, tf, mode=BoundaryMode.NEUMANN)
    for _ in range(50):
        step_wave(field, env, tf, 0.05)
    free = env.free_mask
    ni, nj = free.shape
    for ix, iy in zip(*np.nonzero(env.interface_mask)):
        nbrs = [field.values[ix + dx, iy + dy]
                for dx, dy in ((-1, 0), (1, 0), (0, -1), (0, 1))
                if 0 <= ix + dx < ni and 0 <= iy + dy < nj and free[ix + dx, iy + dy]]
        assert field.values[ix, iy] == pytest.approx(np.mean(nbrs), abs=1e-12)


# -- maximum principle on settled fields --------------------------------------


def strict_extrema_count(field, env):
    v = field.values
    inner = env.free_mask & ~field.target_mask
    count = 0
    for ix, iy in zip(*np.nonzero(inner)):
        nbrs = [v[ix - 1, iy], v[ix + 1, iy], v[ix, iy - 1], v[ix, iy + 1]]
        if v[ix, iy] > max(nbrs) or v[ix, iy] < min(nbrs):
            count += 1
    return count


def test_no_strict_extrema_in_converged_fields():
    env = build_environment(EnvironmentSpec(3.2, 3.2, 0.1, (Rect(1.2, 1.2, 2.0, 2.0),)))
    tf = TargetFootprint((0.55, 0.55), 0.2)
    assert strict_extrema_count(solve_laplace(env, tf), env) == 0
    field = make_time_field(env, FieldKind.WAVE, tf, damping=2.0)
    for _ in range(3000):
        step_wave(field, env, tf, cfl_max_dt(1.0, env.h) * 0.5)
    assert strict_extrema_count(field, env) == 0


# -- occupancy risk field ------------------------------------------------------


def test_occupancy_field_band_and_decay():
    env = build_environment(EnvironmentSpec(6.4, 6.4, 0.2))
    disk = np.zeros_like(env.free_mask)
    ix, iy = env.point_to_cell(4.8, 3.2)
    disk[ix - 1: ix + 2, iy - 1: iy + 2] = True
    field = occupancy_field(env, disk, horizon=1.0)
    vals = field.values[env.free_mask]
    assert vals.min() >= 0.0 and vals.max() <= 1.0
    # risk decays away from the threat disk
    near = field.values[env.point_to_cell(4.3, 3.2)]
    far = field.values[env.point_to_cell(1.6, 3.2)]
    assert near > far
    assert field.values[ix, iy] == 1.0
