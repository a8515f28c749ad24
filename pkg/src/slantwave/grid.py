"""Cartesian discretization of the unit-ball geometry.

Everything lives on a uniform grid over the box [-L, L]^n.  The unit ball
(the support of the medium perturbation) is represented by a point mask, its
boundary by the staircase set of inside cells with at least one outside face
neighbor, and the characteristic plane {t = z} by per-cell slant masks and a
linear-in-time sampler.

Conventions: x = (y, z) with z the LAST axis; the incident direction is +z.
Boundary quadrature weights are h^(n-1) per exposed face, rescaled by the
exact staircase-to-sphere factor (pi/4 in 2D, 2/3 in 3D) so that the total
tends to the sphere area as h -> 0.  This makes surface integrals O(h)
accurate, which is all the staircase representation can support.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Uniform isotropic grid on [-L, L]^n with nx points per axis."""

    n: int
    nx: int
    h: float
    box_half_width: float

    @property
    def origin(self):
        return (-self.box_half_width,) * self.n

    @property
    def shape(self):
        return (self.nx,) * self.n

    def axis(self) -> np.ndarray:
        """Grid coordinates along one axis (identical for all axes)."""
        return -self.box_half_width + self.h * np.arange(self.nx)

    def coords(self, axis: int) -> np.ndarray:
        """Coordinate array of one axis, broadcastable to the full grid."""
        shape = [1] * self.n
        shape[axis] = self.nx
        return self.axis().reshape(shape)

    def radius_sq(self) -> np.ndarray:
        r2 = np.zeros(self.shape)
        for a in range(self.n):
            r2 = r2 + self.coords(a) ** 2
        return r2

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)


@dataclass(frozen=True)
class DomainMask:
    """Points strictly inside the ball of the given radius."""

    grid: GridSpec
    radius: float
    inside: np.ndarray

    def count(self) -> int:
        return int(np.count_nonzero(self.inside))

    def volume(self) -> float:
        return self.count() * self.grid.h**self.grid.n


@dataclass(frozen=True)
class BoundaryCellSet:
    """Staircase boundary: inside cells with >= 1 outside face neighbor."""

    grid: GridSpec
    cells: np.ndarray  # (ncells, n) integer indices, lexicographic order
    unit_z: np.ndarray  # z coordinate per cell
    area_weight: np.ndarray  # per-cell surface quadrature weight

    @property
    def ncells(self) -> int:
        return self.cells.shape[0]

    def index_tuple(self, offset: int = 0):
        """Cells as a fancy-indexing tuple, optionally shifted by `offset`."""
        return tuple(self.cells[:, a] + offset for a in range(self.grid.n))

    def coords(self) -> np.ndarray:
        """(ncells, n) physical coordinates."""
        return -self.grid.box_half_width + self.grid.h * self.cells.astype(float)


@dataclass(frozen=True)
class SlantMask:
    """Per (time index, cell) activity of the region t > z (or t >= z)."""

    active: np.ndarray  # (nt, ncells) bool
    closed: bool


def build_grid(n: int, nx: int, box_half_width: float) -> GridSpec:
    """Uniform grid on [-L, L]^n; the unit ball must fit with margin >= 2h."""
    if n not in (2, 3):
        raise GridError(f"spatial dimension must be 2 or 3, got {n}")
    if nx < 16:
        raise GridError(f"need at least 16 points per axis, got {nx}")
    L = float(box_half_width)
    h = 2.0 * L / (nx - 1)
    if L < 1.0 + 2.0 * h:
        raise GridError(
            f"unit ball does not fit in box of half-width {L} with margin 2h={2 * h:.4g}"
        )
    return GridSpec(n=n, nx=nx, h=h, box_half_width=L)


def ball_mask(grid: GridSpec, radius: float) -> DomainMask:
    if not 0.0 < radius <= grid.box_half_width:
        raise GridError(f"radius {radius} outside (0, {grid.box_half_width}]")
    inside = grid.radius_sq() < radius * radius
    return DomainMask(grid=grid, radius=radius, inside=inside)


# Exact ratio of the staircase surface measure (sum over exposed faces) to the
# true sphere area: the staircase total converges to the integral of
# sum_i |nu_i| over the sphere, which is 4/pi times 2*pi*r in 2D and 3/2 times
# 4*pi*r^2 in 3D.
_STAIRCASE_FACTOR = {2: 4.0 / np.pi, 3: 1.5}


def boundary_cells(mask: DomainMask) -> BoundaryCellSet:
    inside = mask.inside
    grid = mask.grid
    if not inside.any():
        raise GridError("mask is empty, no boundary exists")
    if inside.all():
        raise GridError("mask covers the whole grid, no outside neighbor exists")
    outside = ~inside
    exposed = np.zeros(grid.shape, dtype=np.int64)
    for a in range(grid.n):
        for shift in (1, -1):
            nb = np.roll(outside, shift, axis=a)
            # roll wraps around; points on the box faces see the wrapped
            # values, but the ball never touches the box faces (2h margin)
            exposed += (inside & nb).astype(np.int64)
    is_cell = exposed > 0
    cells = np.argwhere(is_cell)
    z_axis = grid.axis()
    unit_z = z_axis[cells[:, -1]]
    weight = (
        exposed[is_cell].astype(float)
        * grid.h ** (grid.n - 1)
        / _STAIRCASE_FACTOR[grid.n]
    )
    return BoundaryCellSet(grid=grid, cells=cells, unit_z=unit_z, area_weight=weight)


def interior_mask(mask: DomainMask, cells: BoundaryCellSet) -> np.ndarray:
    """Inside points that are not staircase boundary cells."""
    inter = mask.inside.copy()
    inter[cells.index_tuple()] = False
    return inter


def slant_mask(
    cells: BoundaryCellSet, t0: float, dt: float, nt: int, closed: bool = False
) -> SlantMask:
    if dt <= 0:
        raise GridError(f"time step must be positive, got {dt}")
    t = t0 + dt * np.arange(nt)
    if closed:
        active = t[:, None] >= cells.unit_z[None, :]
    else:
        active = t[:, None] > cells.unit_z[None, :]
    return SlantMask(active=active, closed=closed)


def sample_on_slant(series: np.ndarray, z: float, t0: float, dt: float) -> float:
    """Linear interpolation of a time series at t = z."""
    series = np.asarray(series, dtype=float)
    nt = series.shape[0]
    t_end = t0 + dt * (nt - 1)
    if z < t0 - 1e-12 or z > t_end + 1e-12:
        raise GridError(f"slant time {z} outside recorded range [{t0}, {t_end}]")
    pos = (z - t0) / dt
    m = int(np.floor(pos))
    m = min(max(m, 0), nt - 2)
    w = pos - m
    return float((1.0 - w) * series[m] + w * series[m + 1])


def embed_offset(inner: GridSpec, outer: GridSpec) -> int:
    """Index shift placing the inner grid inside the outer one exactly.

    Requires identical spacing and origins differing by an integer number of
    cells; solver boxes are constructed this way (integer half-widths in
    units of h).
    """
    if inner.n != outer.n:
        raise GridError("dimension mismatch between grids")
    if abs(inner.h - outer.h) > 1e-13 * outer.h:
        raise GridError("grid spacings differ, cannot embed")
    off = (outer.box_half_width - inner.box_half_width) / inner.h
    off_i = int(round(off))
    if abs(off - off_i) > 1e-9 or off_i < 0:
        raise GridError("grids are not aligned on a common lattice")
    return off_i


def solver_box(domain: GridSpec, half_width: float) -> tuple[GridSpec, int]:
    """Enclosing box with half-width rounded up to the lattice, plus offset."""
    cells_half = int(np.ceil(half_width / domain.h - 1e-12))
    dom_half = (domain.nx - 1) // 2
    if 2 * dom_half != domain.nx - 1:
        raise GridError("domain grid must have an odd point count per axis")
    cells_half = max(cells_half, dom_half)
    L = cells_half * domain.h
    box = GridSpec(n=domain.n, nx=2 * cells_half + 1, h=domain.h, box_half_width=L)
    return box, embed_offset(domain, box)
