"""Rasterized workspace grid.

The workspace is an axis-aligned box [0, width] x [0, height] discretized into
square cells of side h, surrounded by a one-cell outer wall frame. Arrays are
indexed ``[ix, iy]`` with ix along x; interior cells are ix in 1..nx, iy in
1..ny, and the frame occupies index 0 and n+1 on each axis.

Obstacles are axis-aligned rectangles and circles, rasterized by cell-center
containment (closed: a center exactly on the shape edge counts as inside).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from scipy import ndimage

from .errors import (
    DegenerateNormal,
    DisconnectedFreeSpace,
    NonPositiveCellSize,
    NotBoundaryCell,
    OutOfBounds,
    ShapeOutOfBounds,
    ValidationError,
)

# 4-connectivity; also the fixed order in which neighbor offsets are summed
# when normals are built, so results are deterministic.
NEIGHBOR_OFFSETS = ((-1, 0), (1, 0), (0, -1), (0, 1))

_CONN4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


class CellClass(IntEnum):
    FREE = 0
    OBSTACLE = 1
    BOUNDARY = 2
    OUTER_WALL = 3


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle given by its min/max corners, in meters."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def validate(self):
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ValidationError("rectangle corners must satisfy min < max")

    def contains(self, x, y):
        return (self.xmin <= x) & (x <= self.xmax) & (self.ymin <= y) & (y <= self.ymax)

    def signed_distance(self, x, y):
        # positive outside the shape, negative inside
        qx = np.maximum(self.xmin - x, x - self.xmax)
        qy = np.maximum(self.ymin - y, y - self.ymax)
        outside = np.hypot(np.maximum(qx, 0.0), np.maximum(qy, 0.0))
        inside = np.minimum(np.maximum(qx, qy), 0.0)
        return outside + inside


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    radius: float

    def validate(self):
        if self.radius <= 0:
            raise ValidationError("circle radius must be positive")

    def contains(self, x, y):
        return (x - self.cx) ** 2 + (y - self.cy) ** 2 <= self.radius**2

    def signed_distance(self, x, y):
        return np.hypot(x - self.cx, y - self.cy) - self.radius


Shape = Rect | Circle


@dataclass(frozen=True)
class EnvironmentSpec:
    width: float
    height: float
    cell_size: float
    obstacles: tuple[Shape, ...] = ()


def _axis_cells(extent: float, h: float, name: str) -> int:
    n = int(round(extent / h))
    if n < 1 or abs(n * h - extent) > 1e-9 * max(1.0, extent):
        raise ValidationError(f"{name}={extent:g} is not a positive multiple of cell_size={h:g}")
    return n


class Environment:
    """Immutable rasterized workspace. Build with :func:`build_environment`."""

    def __init__(self, spec: EnvironmentSpec, cells: np.ndarray, nx: int, ny: int):
        self.spec = spec
        self.width = spec.width
        self.height = spec.height
        self.h = spec.cell_size
        self.nx = nx
        self.ny = ny
        self.cells = cells  # uint8, shape (nx+2, ny+2), values are CellClass
        self.free_mask = cells == CellClass.FREE
        self.interface_mask = _interface(self.free_mask)
        self.diagonal = math.hypot(spec.width, spec.height)
        cells.setflags(write=False)
        self.free_mask.setflags(write=False)
        self.interface_mask.setflags(write=False)

    # -- point queries --------------------------------------------------

    def point_to_cell(self, x: float, y: float) -> tuple[int, int]:
        """Array index of the interior cell containing (x, y).

        Points exactly on a shared cell edge resolve to the lower-index cell.
        """
        if not (0.0 <= x <= self.width and 0.0 <= y <= self.height):
            raise OutOfBounds(f"({x:g}, {y:g}) outside [0, {self.width:g}] x [0, {self.height:g}]")
        return (_axis_index(x, self.h, self.nx) + 1, _axis_index(y, self.h, self.ny) + 1)

    def classify_point(self, x: float, y: float) -> CellClass:
        ix, iy = self.point_to_cell(x, y)
        return CellClass(self.cells[ix, iy])

    def cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        return ((ix - 0.5) * self.h, (iy - 0.5) * self.h)

    def in_free_space(self, x: float, y: float) -> bool:
        try:
            return self.classify_point(x, y) is CellClass.FREE
        except OutOfBounds:
            return False

    # -- boundary geometry ----------------------------------------------

    def interface_normal(self, ix: int, iy: int) -> np.ndarray:
        """Unit normal of a non-free cell with free neighbors, pointing into
        free space. Works for obstacle rims and the wall rim alike."""
        if not self.interface_mask[ix, iy]:
            raise NotBoundaryCell(f"cell ({ix}, {iy}) has no free 4-neighbor")
        sx = sy = 0
        for dx, dy in NEIGHBOR_OFFSETS:
            if self.free_mask[ix + dx, iy + dy]:
                sx += dx
                sy += dy
        norm = math.hypot(sx, sy)
        if norm == 0.0:
            raise DegenerateNormal(f"free-neighbor offsets cancel at cell ({ix}, {iy})")
        return np.array([sx / norm, sy / norm])

    def boundary_normal(self, ix: int, iy: int) -> np.ndarray:
        """Unit normal of a BOUNDARY cell (obstacle rim), pointing into free space."""
        if self.cells[ix, iy] != CellClass.BOUNDARY:
            raise NotBoundaryCell(f"cell ({ix}, {iy}) is {CellClass(self.cells[ix, iy]).name}, not BOUNDARY")
        return self.interface_normal(ix, iy)

    def signed_clearance(self, x: float, y: float) -> float:
        """Distance to the nearest obstacle surface or outer wall.

        Positive in free space, zero on a surface, negative inside a shape.
        1-Lipschitz in the query point.
        """
        d = min(x, y, self.width - x, self.height - y)
        for shape in self.spec.obstacles:
            d = min(d, float(shape.signed_distance(x, y)))
        return d


def _axis_index(coord: float, h: float, n: int) -> int:
    i = int(math.floor(coord / h))
    if i > 0 and coord <= i * h:
        i -= 1  # exact-edge points belong to the lower cell
    return min(i, n - 1)


def _interface(free: np.ndarray) -> np.ndarray:
    """Non-free cells having at least one free 4-neighbor."""
    near_free = np.zeros_like(free)
    near_free[1:, :] |= free[:-1, :]
    near_free[:-1, :] |= free[1:, :]
    near_free[:, 1:] |= free[:, :-1]
    near_free[:, :-1] |= free[:, 1:]
    return near_free & ~free


def build_environment(spec: EnvironmentSpec) -> Environment:
    """Rasterize a workspace spec onto the cell grid.

    Raises NonPositiveCellSize, ShapeOutOfBounds, ValidationError for bad
    specs and DisconnectedFreeSpace when the free cells do not form exactly
    one 4-connected component.
    """
    if spec.cell_size <= 0:
        raise NonPositiveCellSize(f"cell_size must be positive, got {spec.cell_size:g}")
    nx = _axis_cells(spec.width, spec.cell_size, "width")
    ny = _axis_cells(spec.height, spec.cell_size, "height")

    for shape in spec.obstacles:
        shape.validate()
        if isinstance(shape, Rect):
            inside = (
                0.0 <= shape.xmin and shape.xmax <= spec.width
                and 0.0 <= shape.ymin and shape.ymax <= spec.height
            )
        else:
            inside = (
                shape.radius <= shape.cx <= spec.width - shape.radius
                and shape.radius <= shape.cy <= spec.height - shape.radius
            )
        if not inside:
            raise ShapeOutOfBounds(f"{shape} does not fit inside the workspace")

    h = spec.cell_size
    cells = np.full((nx + 2, ny + 2), CellClass.FREE, dtype=np.uint8)
    cells[0, :] = cells[-1, :] = CellClass.OUTER_WALL
    cells[:, 0] = cells[:, -1] = CellClass.OUTER_WALL

    # cell-center containment
    cx = (np.arange(1, nx + 1) - 0.5) * h
    cy = (np.arange(1, ny + 1) - 0.5) * h
    gx, gy = np.meshgrid(cx, cy, indexing="ij")
    blocked = np.zeros((nx, ny), dtype=bool)
    for shape in spec.obstacles:
        blocked |= shape.contains(gx, gy)
    cells[1:-1, 1:-1][blocked] = CellClass.OBSTACLE

    # obstacle cells touching free space form the rim; the frame keeps OUTER_WALL
    free = cells == CellClass.FREE
    rim = _interface(free) & (cells == CellClass.OBSTACLE)
    cells[rim] = CellClass.BOUNDARY

    nfree = int(free.sum())
    if nfree == 0:
        raise DisconnectedFreeSpace("workspace has no free cells", components=0)
    _, ncomp = ndimage.label(free, structure=_CONN4)
    if ncomp != 1:
        raise DisconnectedFreeSpace(
            f"free space splits into {ncomp} components", components=ncomp
        )

    return Environment(spec, cells, nx, ny)
