"""Pure-NumPy stencil kernels (fallback backend).

The compiled backend in _kernels_cy.pyx mirrors the per-cell evaluation order
of these expressions exactly, so the two backends produce bit-identical
results. Keep any arithmetic change synchronized between the two files.

All arrays are full-grid (nx+2, ny+2) C-contiguous float64; masks are uint8
over the same shape. Cells on the frame are never updated.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def _neighbor_sum(values):
    # ((N + S) + W) + E in array terms; matches the compiled summation order
    return (
        (values[:-2, 1:-1] + values[2:, 1:-1]) + values[1:-1, :-2]
    ) + values[1:-1, 2:]


def sor_sweep(values, red, black, omega):
    """One red-black successive-over-relaxation sweep of the 5-point Laplace
    stencil, in place. ``red``/``black`` select the cells of each color that
    are free and unclamped. Returns the largest absolute update."""
    max_delta = 0.0
    core = values[1:-1, 1:-1]
    for mask in (red, black):
        m = mask[1:-1, 1:-1].view(bool)
        nbr = _neighbor_sum(values)
        new = core + omega * (0.25 * nbr - core)
        delta = new[m] - core[m]
        core[m] = new[m]
        if delta.size:
            d = float(np.abs(delta).max())
            if d > max_delta:
                max_delta = d
    return max_delta


def diffusion_step(values, out, update, r):
    """out <- explicit diffusion update on masked cells; out is prefilled
    with a copy of values so clamped cells carry over unchanged."""
    m = update[1:-1, 1:-1].view(bool)
    core = values[1:-1, 1:-1]
    nbr = _neighbor_sum(values)
    new = core + r * (nbr - 4.0 * core)
    out[1:-1, 1:-1][m] = new[m]


def wave_step(values, prev, out, update, c2, gdt):
    """out <- leapfrog update with optional linear damping, masked cells only."""
    m = update[1:-1, 1:-1].view(bool)
    core = values[1:-1, 1:-1]
    pcore = prev[1:-1, 1:-1]
    nbr = _neighbor_sum(values)
    new = (2.0 * core - pcore) + c2 * (nbr - 4.0 * core) - gdt * (core - pcore)
    out[1:-1, 1:-1][m] = new[m]
