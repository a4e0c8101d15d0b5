"""Verification instruments for finished games and converged fields.

Five independent checks, each a pure function from a trace or a field to a
report dataclass: potential descent along the pursuit, the discrete maximum
principle, wall-avoidance margins, critical-point structure, and the coupling
between evader turning and closure bursts. None of them mutate their inputs,
so the same trace can be fed to all of them in any order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import GameTrace
from .environment import CellClass, Environment
from .errors import MissingSnapshots, TraceTooShort, ValidationError
from .fields import PotentialField
from .guidance import RegularizerParams, sample_gradient

__all__ = [
    "LyapunovReport",
    "AvoidanceReport",
    "CriticalPoint",
    "CriticalPointReport",
    "CurvatureReport",
    "lyapunov_check",
    "maximum_principle_check",
    "boundary_probe",
    "avoidance_margin_check",
    "morse_check",
    "curvature_closure_correlation",
]


# -- potential descent --------------------------------------------------------

@dataclass(frozen=True)
class LyapunovReport:
    """Per-tick descent audit of the sampled potential.

    Rates are backward differences, so arrays hold one entry per trace row
    after the first. ``eligible`` marks rows whose command point sat outside
    the regularizer floor region; the summary statistics quantify over those
    rows only and are vacuously 1.0 (violation 0.0) when none qualify.
    """

    t: np.ndarray
    potential: np.ndarray
    analytic_rate: np.ndarray   # -|grad V|^2 at the point the command used
    realized_rate: np.ndarray   # (V_k - V_{k-1}) / dt along the actual motion
    eligible: np.ndarray
    max_violation: float        # most positive realized rate over eligible rows
    fraction_negative: float
    fraction_agreeing: float
    agreement_tolerance: float
    min_potential: float        # over rows before capture


def lyapunov_check(
    trace: GameTrace,
    regularizer: RegularizerParams | None = None,
    agreement_tolerance: float = 0.2,
) -> LyapunovReport:
    """Audit a pursuit trace for monotone potential decay.

    The feed-through law promises dV/dt = -|grad V|^2 along the pursuer's
    motion whenever the squared gradient clears the regularizer threshold;
    rows below the threshold (and rows at or after first capture) are
    excluded rather than graded. Agreement is relative: a row agrees when
    |realized - analytic| <= tol * |analytic|, which is well posed because
    eligibility bounds |analytic| away from zero.
    """
    for name in ("potential", "cmd_grad_sq", "t"):
        arr = getattr(trace, name, None)
        if arr is None or len(arr) == 0:
            raise MissingSnapshots(f"trace carries no {name} samples")
    if len(trace) < 2:
        raise MissingSnapshots("need at least two rows to form a rate")

    dt = float(trace.metadata.get("dt", trace.t[1] - trace.t[0]))
    if dt <= 0.0:
        raise ValidationError("non-positive dt", field="dt")
    if regularizer is None:
        regularizer = RegularizerParams()

    v = np.asarray(trace.potential, dtype=np.float64)
    realized = np.diff(v) / dt
    grad_sq = np.asarray(trace.cmd_grad_sq, dtype=np.float64)[1:]
    analytic = -grad_sq

    eligible = grad_sq >= regularizer.threshold
    first_hit = trace.first_capture_tick
    if first_hit is not None:
        # rates are indexed from row 1; keep the step that achieved capture
        eligible &= np.arange(1, len(v)) <= first_hit
        pre_capture = v[: first_hit + 1]
    else:
        pre_capture = v

    if eligible.any():
        ra = realized[eligible]
        an = analytic[eligible]
        max_violation = float(ra.max())
        fraction_negative = float(np.mean(ra < 0.0))
        fraction_agreeing = float(
            np.mean(np.abs(ra - an) <= agreement_tolerance * np.abs(an))
        )
    else:
        max_violation = 0.0
        fraction_negative = 1.0
        fraction_agreeing = 1.0

    return LyapunovReport(
        t=trace.t[1:].copy(),
        potential=v[1:].copy(),
        analytic_rate=analytic,
        realized_rate=realized,
        eligible=eligible,
        max_violation=max_violation,
        fraction_negative=fraction_negative,
        fraction_agreeing=fraction_agreeing,
        agreement_tolerance=float(agreement_tolerance),
        min_potential=float(pre_capture.min()),
    )


# -- discrete maximum principle ----------------------------------------------

def maximum_principle_check(field: PotentialField, slack: float | None = None):
    """Cells that are strict local extrema against their four neighbors.

    Scans every relaxed cell (free and not clamped) and returns the
    ghost-inclusive (ix, iy) index pairs of violations as an (n, 2) array.
    A converged steady solve admits none: each relaxed cell equals its
    neighbor average up to the solver residual, which is why the default
    slack sits just above that residual. Transient wave fields are
    hyperbolic and may legitimately violate; this check is meant for
    steady or fully damped fields.
    """
    if slack is None:
        slack = 2e-6 * abs(field.level) if field.level != 0.0 else 1e-12
    v = field.values
    center = v[1:-1, 1:-1]
    stacked = np.stack([v[2:, 1:-1], v[:-2, 1:-1], v[1:-1, 2:], v[1:-1, :-2]])
    relaxed = field.update_u8.astype(bool)[1:-1, 1:-1]
    hi = relaxed & (center > stacked.max(axis=0) + slack)
    lo = relaxed & (center < stacked.min(axis=0) - slack)
    ii, jj = np.nonzero(hi | lo)
    return np.column_stack([ii + 1, jj + 1])


# -- wall avoidance -----------------------------------------------------------

@dataclass(frozen=True)
class AvoidanceReport:
    band_width: float
    min_clearance_pursuer: float
    min_clearance_evader: float
    obstacle_hits: int              # agent rows classifying as non-free, want 0
    band_ticks: np.ndarray          # rows with pursuer clearance inside the band
    normal_derivative: np.ndarray   # dV/dn at those rows, NaN without a field
    fraction_normal_negative: float
    receding_fraction: float        # band rows where squared clearance did not shrink


def _clearance_normal(env: Environment, x: float, y: float):
    """Unit direction of increasing clearance, or None where it degenerates."""
    d = 0.5 * env.h
    nx = env.signed_clearance(min(x + d, env.width), y) - env.signed_clearance(max(x - d, 0.0), y)
    ny = env.signed_clearance(x, min(y + d, env.height)) - env.signed_clearance(x, max(y - d, 0.0))
    norm = math.hypot(nx, ny)
    if norm < 1e-12:
        return None
    return np.array([nx / norm, ny / norm])


def boundary_probe(
    field: PotentialField,
    band_width: float | None = None,
    min_contrast: float = 0.0,
) -> np.ndarray:
    """dV/dn at every relaxed cell center inside the wall band.

    The probe direction points away from the nearest surface, so for a
    Dirichlet solve (walls clamped high) the derivative should come back
    negative: potential falls as clearance grows. Neumann solves should
    instead report magnitudes of order h near the insulated surface.
    Degenerate probe points (clearance ridge, opposing walls equidistant)
    are dropped.

    In strongly shielded pockets (a long corridor with the target far away)
    the potential decays below what the solver resolves and whole bands sit
    at the clamp level to within tolerance; sampled derivatives there are
    rounding noise with arbitrary sign. ``min_contrast`` skips probe cells
    whose value is within that distance of ``field.level``, keeping only
    cells where the solve actually resolved a drop. The cut looks at the
    cell value, never at the derivative being measured. Pass roughly ten
    times the solve tolerance; the default keeps every probe.
    """
    env = field.env
    if band_width is None:
        band_width = 2.0 * env.h
    relaxed = field.update_u8.astype(bool)
    out = []
    for ix, iy in np.argwhere(relaxed):
        x, y = env.cell_center(ix, iy)
        if not (0.0 < env.signed_clearance(x, y) < band_width):
            continue
        if min_contrast > 0.0 and abs(field.values[ix, iy] - field.level) <= min_contrast:
            continue
        n = _clearance_normal(env, x, y)
        if n is None:
            continue
        g = sample_gradient(field, x, y)
        out.append(float(g @ n))
    return np.asarray(out, dtype=np.float64)


def avoidance_margin_check(
    trace: GameTrace,
    env: Environment,
    field: PotentialField | None = None,
    band_width: float | None = None,
) -> AvoidanceReport:
    """Audit a trace for obstacle contact and near-wall repulsion.

    Every recorded agent position must classify as free space; any other
    classification counts as a hit. Rows where the pursuer's clearance
    enters the band get a dV/dn probe against the supplied field (the final
    or steady field; per-tick snapshots are not retained in traces, so for
    moving targets this is an end-state approximation) plus a check that
    the squared clearance stopped shrinking.
    """
    if band_width is None:
        band_width = 2.0 * env.h

    hits = 0
    for px, py in np.asarray(trace.pursuer, dtype=np.float64):
        if env.classify_point(px, py) is not CellClass.FREE:
            hits += 1
    for ex, ey in np.asarray(trace.evader, dtype=np.float64):
        if env.classify_point(ex, ey) is not CellClass.FREE:
            hits += 1

    cp = np.asarray(trace.clearance_p, dtype=np.float64)
    band = np.flatnonzero(cp < band_width)

    derivs = np.full(band.size, np.nan)
    if field is not None:
        for row, k in enumerate(band):
            x, y = trace.pursuer[k]
            n = _clearance_normal(env, float(x), float(y))
            if n is None:
                continue
            derivs[row] = float(sample_gradient(field, float(x), float(y)) @ n)

    finite = derivs[np.isfinite(derivs)]
    fraction_negative = float(np.mean(finite < 0.0)) if finite.size else float("nan")

    # inside the band the clearance squared should be non-decreasing; grade
    # each band row that has a successor
    graded = band[band < len(trace) - 1]
    if graded.size:
        receding = float(np.mean(cp[graded + 1] ** 2 >= cp[graded] ** 2))
    else:
        receding = 1.0

    return AvoidanceReport(
        band_width=float(band_width),
        min_clearance_pursuer=float(cp.min()),
        min_clearance_evader=float(np.min(trace.clearance_e)),
        obstacle_hits=hits,
        band_ticks=band,
        normal_derivative=derivs,
        fraction_normal_negative=fraction_negative,
        receding_fraction=receding,
    )


# -- critical points ----------------------------------------------------------

@dataclass(frozen=True)
class CriticalPoint:
    cell: tuple[int, int]           # ghost-inclusive grid index
    position: tuple[float, float]
    grad_norm: float
    hessian: np.ndarray             # 2x2 central-difference estimate
    eigenvalues: tuple[float, float]  # ascending
    kind: str                       # minimum / maximum / saddle / degenerate


@dataclass(frozen=True)
class CriticalPointReport:
    grad_threshold: float
    eig_floor: float
    points: tuple[CriticalPoint, ...]
    min_abs_det: float              # over points, inf when none found
    max_abs_trace: float            # 0 when none found
    nondegenerate: bool             # every point clears the eigenvalue floor


def morse_check(
    field: PotentialField,
    grad_threshold: float | None = None,
    eig_floor: float | None = None,
) -> CriticalPointReport:
    """Locate interior stationary cells and classify their Hessians.

    A cell is a candidate when its central-difference gradient norm falls
    under grad_threshold (default 1e-3 * level / domain diagonal, the
    natural gradient scale of a clamped solve). Touching candidates are
    clustered eight-connected and each cluster reports its flattest cell.
    Only cells whose full eight-neighborhood is free qualify: against a
    clamp or a wall the stencil is one-sided and the Hessian meaningless.

    The eigenvalue floor (default 40 * 1e-6 * level / h^2, ten times the
    Hessian noise left by a residual-converged solve) decides degeneracy.
    For a steady solve of the clamped membrane every interior point is
    expected to be a saddle and the Hessian trace sits at the discretization
    error, order h^2.
    """
    env = field.env
    if grad_threshold is None:
        grad_threshold = 1e-3 * abs(field.level) / env.diagonal
    if eig_floor is None:
        eig_floor = 40.0 * 1e-6 * abs(field.level) / field.h ** 2

    v = field.values
    h = field.h
    relaxed = field.update_u8.astype(bool)
    free = env.free_mask

    # full-stencil interior: the cell and all eight neighbors free and unclamped
    ok = relaxed.copy()
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            ok[1:-1, 1:-1] &= (free & relaxed)[1 + dx:v.shape[0] - 1 + dx,
                                               1 + dy:v.shape[1] - 1 + dy]
    ok[0, :] = ok[-1, :] = ok[:, 0] = ok[:, -1] = False

    gx = np.zeros_like(v)
    gy = np.zeros_like(v)
    gx[1:-1, :] = (v[2:, :] - v[:-2, :]) / (2 * h)
    gy[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2 * h)
    gnorm = np.hypot(gx, gy)

    candidate = ok & (gnorm < grad_threshold)
    points = []
    seen = np.zeros_like(candidate)
    for ix, iy in np.argwhere(candidate):
        if seen[ix, iy]:
            continue
        # flood the eight-connected cluster, keep its flattest cell
        stack = [(ix, iy)]
        seen[ix, iy] = True
        best = (gnorm[ix, iy], ix, iy)
        while stack:
            cx, cy = stack.pop()
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    nx2, ny2 = cx + dx, cy + dy
                    if candidate[nx2, ny2] and not seen[nx2, ny2]:
                        seen[nx2, ny2] = True
                        stack.append((nx2, ny2))
                        if gnorm[nx2, ny2] < best[0]:
                            best = (gnorm[nx2, ny2], nx2, ny2)
        _, bx, by = best
        hxx = (v[bx + 1, by] - 2 * v[bx, by] + v[bx - 1, by]) / h ** 2
        hyy = (v[bx, by + 1] - 2 * v[bx, by] + v[bx, by - 1]) / h ** 2
        hxy = (v[bx + 1, by + 1] - v[bx + 1, by - 1]
               - v[bx - 1, by + 1] + v[bx - 1, by - 1]) / (4 * h ** 2)
        hess = np.array([[hxx, hxy], [hxy, hyy]])
        lam = np.linalg.eigvalsh(hess)
        lo, hi = float(lam[0]), float(lam[1])
        if min(abs(lo), abs(hi)) <= eig_floor:
            kind = "degenerate"
        elif lo > 0:
            kind = "minimum"
        elif hi < 0:
            kind = "maximum"
        else:
            kind = "saddle"
        points.append(CriticalPoint(
            cell=(int(bx), int(by)),
            position=env.cell_center(int(bx), int(by)),
            grad_norm=float(gnorm[bx, by]),
            hessian=hess,
            eigenvalues=(lo, hi),
            kind=kind,
        ))

    if points:
        min_abs_det = min(abs(p.eigenvalues[0] * p.eigenvalues[1]) for p in points)
        max_abs_trace = max(abs(p.hessian[0, 0] + p.hessian[1, 1]) for p in points)
        nondegenerate = all(p.kind != "degenerate" for p in points)
    else:
        min_abs_det = float("inf")
        max_abs_trace = 0.0
        nondegenerate = True

    return CriticalPointReport(
        grad_threshold=float(grad_threshold),
        eig_floor=float(eig_floor),
        points=tuple(points),
        min_abs_det=float(min_abs_det),
        max_abs_trace=float(max_abs_trace),
        nondegenerate=nondegenerate,
    )


# -- turning versus closure ---------------------------------------------------

@dataclass(frozen=True)
class CurvatureReport:
    curvature: np.ndarray           # normalized to peak 1, zero-padded at both ends
    distance_increments: np.ndarray  # per-row change, zero-padded at row 0
    peaks: np.ndarray               # row indices of qualifying curvature maxima
    drops: np.ndarray               # row indices of steepest closure
    matched_peaks: np.ndarray
    window: int
    fraction_matched: float         # NaN when no peaks qualify
    peak_level: float
    drop_percentile: float


def curvature_closure_correlation(
    trace: GameTrace,
    window: int = 10,
    peak_level: float = 0.5,
    drop_percentile: float = 10.0,
    motion_threshold: float | None = None,
) -> CurvatureReport:
    """Measure whether evader turns line up with bursts of closure.

    Discrete curvature of the evader path, |dx cross d2x| / |dx|^3, is zeroed
    on rows that barely move (threshold defaults to 1e-3 of the largest step,
    which silences idle dithering without touching real travel) and then
    normalized to peak one. Peaks are strict local maxima above peak_level;
    drops are rows whose distance increment is negative and at or below the
    given percentile of all increments. A peak counts as matched when some
    drop lands within the window on either side.
    """
    n = len(trace)
    ev = np.asarray(trace.evader, dtype=np.float64)
    if n < 4:
        raise TraceTooShort(f"{n} rows, need at least 4")

    steps = np.diff(ev, axis=0)                 # steps[k] = e[k+1] - e[k]
    lengths = np.hypot(steps[:, 0], steps[:, 1])
    if motion_threshold is None:
        motion_threshold = 1e-3 * float(lengths.max(initial=0.0))
    if np.count_nonzero(lengths > motion_threshold) < 3:
        raise TraceTooShort("fewer than three rows with actual motion")

    # curvature at interior rows k = 1 .. n-2
    d1 = steps[:-1]                             # e[k] - e[k-1]
    d2 = steps[1:] - steps[:-1]                 # e[k+1] - 2 e[k] + e[k-1]
    cross = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    denom = np.hypot(d1[:, 0], d1[:, 1]) ** 3
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa = np.where(denom > motion_threshold ** 3,
                         np.abs(cross) / denom, 0.0)
    curvature = np.zeros(n)
    curvature[1:-1] = kappa
    peak = curvature.max()
    if peak > 0.0:
        curvature = curvature / peak

    inc = np.zeros(n)
    inc[1:] = np.diff(np.asarray(trace.distance, dtype=np.float64))

    interior = curvature[1:-1]
    is_peak = (interior > peak_level) \
        & (interior > curvature[:-2]) & (interior > curvature[2:])
    peaks = np.flatnonzero(is_peak) + 1

    cut = np.percentile(inc[1:], drop_percentile)
    drops = np.flatnonzero((inc < 0.0) & (inc <= cut))

    if peaks.size and drops.size:
        gaps = np.abs(peaks[:, None] - drops[None, :]).min(axis=1)
        matched = peaks[gaps <= window]
    else:
        matched = np.array([], dtype=int)
    fraction = matched.size / peaks.size if peaks.size else float("nan")

    return CurvatureReport(
        curvature=curvature,
        distance_increments=inc,
        peaks=peaks,
        drops=drops,
        matched_peaks=matched,
        window=int(window),
        fraction_matched=float(fraction),
        peak_level=float(peak_level),
        drop_percentile=float(drop_percentile),
    )
