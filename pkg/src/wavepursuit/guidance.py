"""Steering commands from a potential field.

The raw law descends the gradient and adds a time-derivative feed-through:

    g = -(grad V + grad V / |grad V|^2 * dV/dt)

The second term is what makes a wave-carried field anticipatory, but it blows
up where the gradient vanishes. The regularized law swaps |grad V|^2 for a
floor-limited version: identity above a threshold, a C1 cubic blend with a
strictly positive floor below it, so commands stay finite everywhere and are
bit-identical to the raw law wherever the gradient is healthy.

Values and gradients are sampled bilinearly from cell centers; gradients use
central differences where both lateral neighbors hold meaningful values and
one-sided differences on the free-space rim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import OutOfBounds, OutOfDomain, QueryInObstacle, SingularGradient
from .fields import PotentialField

_EDGE_EPS = 1e-9


@dataclass(frozen=True)
class RegularizerParams:
    """Floor-limited denominator parameters, in field units squared.

    ``threshold`` is where the blend hands over to the identity; ``floor`` is
    the value at zero gradient. Distinct from any spatial capture radius.
    """

    threshold: float = 1e-3
    floor: float = 1e-4

    def __post_init__(self):
        if not (0.0 < self.floor < self.threshold):
            raise OutOfDomain(
                f"need 0 < floor < threshold, got floor={self.floor:g} "
                f"threshold={self.threshold:g}"
            )


@dataclass(frozen=True)
class GuidanceCommand:
    velocity: np.ndarray
    potential: float
    grad_sq: float
    dvdt: float


def cubic_blend(s: float, params: RegularizerParams) -> float:
    """Cubic on [0, threshold] with value floor at 0, slope 0 at 0, and a C1
    join to the identity at the threshold."""
    rho, eps = params.threshold, params.floor
    if s < -_EDGE_EPS * rho or s > rho * (1.0 + _EDGE_EPS):
        raise OutOfDomain(f"blend argument {s:g} outside [0, {rho:g}]")
    s = min(max(s, 0.0), rho)
    return eps + (2.0 * rho - 3.0 * eps) / rho**2 * s * s + (2.0 * eps - rho) / rho**3 * s**3

def regularized_denominator(s: float, params: RegularizerParams) -> float:
    """Identity for s >= threshold, cubic blend below; never smaller than floor."""
    if s >= params.threshold:
        return s
    return cubic_blend(s, params)


# -- bilinear sampling --------------------------------------------------------


def _interp_weights(field: PotentialField, x: float, y: float):
    """Corner indices and weights of the 2x2 cell-center neighborhood."""
    h = field.h
    fx = x / h + 0.5
    fy = y / h + 0.5
    i0 = int(math.floor(fx))
    j0 = int(math.floor(fy))
    i0 = min(max(i0, 0), field.values.shape[0] - 2)
    j0 = min(max(j0, 0), field.values.shape[1] - 2)
    tx = fx - i0
    ty = fy - j0
    w = (
        ((i0, j0), (1.0 - tx) * (1.0 - ty)),
        ((i0 + 1, j0), tx * (1.0 - ty)),
        ((i0, j0 + 1), (1.0 - tx) * ty),
        ((i0 + 1, j0 + 1), tx * ty),
    )
    return w


def _check_query(field: PotentialField, x: float, y: float):
    env = field.env
    if not (0.0 <= x <= env.width and 0.0 <= y <= env.height):
        raise OutOfBounds(f"query ({x:g}, {y:g}) outside the workspace")
    ix, iy = env.point_to_cell(x, y)
    if not env.free_mask[ix, iy]:
        raise QueryInObstacle(f"query ({x:g}, {y:g}) is not in free space")


def _masked_bilinear(field: PotentialField, grid: np.ndarray, x: float, y: float) -> float:
    """Bilinear interpolation skipping corners with no meaningful value
    (deep-obstacle cells), renormalizing the remaining weights."""
    readable = field.env.free_mask | field.env.interface_mask
    total = 0.0
    wsum = 0.0
    for (i, j), w in _interp_weights(field, x, y):
        if readable[i, j]:
            total += w * grid[i, j]
            wsum += w
    if wsum <= 0.0:
        raise QueryInObstacle(f"no valid interpolation corners at ({x:g}, {y:g})")
    if wsum >= 1.0 - _EDGE_EPS:
        return total
    return total / wsum


def sample_potential(field: PotentialField, x: float, y: float) -> float:
    _check_query(field, x, y)
    return _masked_bilinear(field, field.values, x, y)


def _gradient_grids(field: PotentialField):
    """Cached per-cell central differences; one-sided where a lateral
    neighbor carries no meaningful value."""
    cache = getattr(field, "_grad_cache", None)
    if cache is not None and cache[0] == field.version:
        return cache[1], cache[2]
    env = field.env
    v = field.values
    readable = (env.free_mask | env.interface_mask).astype(np.float64)
    h = field.h
    gx = np.zeros_like(v)
    gy = np.zeros_like(v)

    def axis_grad(out, shift_minus, shift_plus, r_minus, r_plus):
        both = (r_minus > 0) & (r_plus > 0)
        only_p = (r_plus > 0) & ~both
        only_m = (r_minus > 0) & ~both
        out[both] = (shift_plus[both] - shift_minus[both]) / (2.0 * h)
        out[only_p] = (shift_plus[only_p] - v[1:-1, 1:-1][only_p]) / h
        out[only_m] = (v[1:-1, 1:-1][only_m] - shift_minus[only_m]) / h

    core = (slice(1, -1), slice(1, -1))
    axis_grad(gx[core], v[:-2, 1:-1], v[2:, 1:-1], readable[:-2, 1:-1], readable[2:, 1:-1])
    axis_grad(gy[core], v[1:-1, :-2], v[1:-1, 2:], readable[1:-1, :-2], readable[1:-1, 2:])
    field._grad_cache = (field.version, gx, gy)
    return gx, gy


def sample_gradient(field: PotentialField, x: float, y: float) -> np.ndarray:
    _check_query(field, x, y)
    gx, gy = _gradient_grids(field)
    return np.array([
        _masked_bilinear(field, gx, x, y),
        _masked_bilinear(field, gy, x, y),
    ])


def sample_time_derivative(field: PotentialField, x: float, y: float) -> float:
    """Interpolated backward difference; zero for fields that have not
    stepped (steady solves are static by definition).

    A rate reference installed via set_rate_reference takes precedence over
    the per-step difference while it is current.
    """
    _check_query(field, x, y)
    if getattr(field, "_rate_version", None) == field.version:
        return _masked_bilinear(field, field._rate_grid, x, y)
    if field.last_dt is None:
        return 0.0
    cache = getattr(field, "_dvdt_cache", None)
    if cache is None or cache[0] != field.version:
        cache = (field.version, (field.values - field.prev_values) / field.last_dt)
        field._dvdt_cache = cache
    return _masked_bilinear(field, cache[1], x, y)


# -- command laws --------------------------------------------------------------


def guidance_raw(field: PotentialField, x: float, y: float) -> GuidanceCommand:
    """Unregularized law; raises SingularGradient on an exactly zero gradient."""
    grad = sample_gradient(field, x, y)
    grad_sq = float(grad[0] * grad[0] + grad[1] * grad[1])
    dvdt = sample_time_derivative(field, x, y)
    if grad_sq == 0.0:
        raise SingularGradient(f"zero gradient at ({x:g}, {y:g})")
    vel = -(grad + grad / grad_sq * dvdt)
    return GuidanceCommand(vel, sample_potential(field, x, y), grad_sq, dvdt)


def guidance_regularized(
    field: PotentialField, x: float, y: float, params: RegularizerParams
) -> GuidanceCommand:
    """Floor-limited law: finite everywhere, equal to the raw law (bitwise)
    wherever |grad V|^2 >= threshold."""
    grad = sample_gradient(field, x, y)
    grad_sq = float(grad[0] * grad[0] + grad[1] * grad[1])
    dvdt = sample_time_derivative(field, x, y)
    den = regularized_denominator(grad_sq, params)
    vel = -(grad + grad / den * dvdt)
    return GuidanceCommand(vel, sample_potential(field, x, y), grad_sq, dvdt)


def normalize_command(velocity: np.ndarray, speed: float) -> np.ndarray:
    """Rescale to the given speed; the zero vector stays zero."""
    norm = math.hypot(float(velocity[0]), float(velocity[1]))
    if norm == 0.0:
        return np.zeros(2)
    return velocity * (speed / norm)
