"""Discrete norms and energies.

The plane seminorm is the H1-type quantity that controls the inversion: for
data g(y,z) on the ball footprint it is

    ( sum_inside (|grad_y g|^2 + |d_z g|^2) h^n )^(1/2),

which equals the surface seminorm of the corresponding function on the
characteristic plane (the 1/sqrt(2) surface factor and the sqrt(2) slant
area element cancel).  Volume energies use centered differences and the
final-time functional restricts them to the ball.  Trace norms on the
lateral boundary are staircase-accurate proxies: per-cell quadrature
weights, centered time differences, and difference quotients along the
boundary adjacency graph, all restricted to the active slant region.
"""

from __future__ import annotations

import numpy as np

from .forward import BoundaryTrace, PlaneData
from .grid import BoundaryCellSet

__all__ = [
    "plane_h1_seminorm",
    "plane_l2_norm",
    "interior_energy_norm",
    "energy",
    "weighted_rim_norm",
    "trace_l2_norm",
    "trace_h1_norm",
]


def _central_gradients(values: np.ndarray, h: float) -> list[np.ndarray]:
    return list(np.gradient(values, h, edge_order=1))


def plane_h1_seminorm(F: PlaneData) -> float:
    grid = F.grid
    inside = grid.radius_sq() < 1.0
    grads = _central_gradients(F.values, grid.h)
    total = np.zeros_like(F.values)
    for g in grads:
        total += g * g
    return float(np.sqrt(total[inside].sum() * grid.h**grid.n))


def plane_l2_norm(F: PlaneData) -> float:
    grid = F.grid
    inside = grid.radius_sq() < 1.0
    return float(np.sqrt((F.values[inside] ** 2).sum() * grid.h**grid.n))


def energy(u: np.ndarray, ut: np.ndarray, h: float, mask: np.ndarray | None = None) -> float:
    """Wave energy integral (|grad u|^2 + |ut|^2) over the box or a mask."""
    dens = ut * ut
    for g in _central_gradients(u, h):
        dens = dens + g * g
    if mask is not None:
        dens = dens[mask]
    return float(dens.sum() * h ** u.ndim)


def interior_energy_norm(u: np.ndarray, ut: np.ndarray, inside: np.ndarray, h: float) -> float:
    """Final-time energy functional over the ball, as a norm."""
    return float(np.sqrt(energy(u, ut, h, mask=inside)))


def _rim_adjacency(cells: BoundaryCellSet):
    """Pairs of boundary cells within Chebyshev distance 1, with distances."""
    n = cells.grid.n
    lookup = {tuple(c): i for i, c in enumerate(cells.cells)}
    offsets = []
    for off in np.ndindex(*(3,) * n):
        d = np.array(off) - 1
        if (d == 0).all():
            continue
        offsets.append(d)
    pairs_a, pairs_b, dists = [], [], []
    for i, c in enumerate(cells.cells):
        for d in offsets:
            nb = tuple(c + d)
            j = lookup.get(nb)
            if j is not None and j > i:
                pairs_a.append(i)
                pairs_b.append(j)
                dists.append(np.sqrt((d * d).sum()) * cells.grid.h)
    return np.array(pairs_a), np.array(pairs_b), np.array(dists)


def weighted_rim_norm(F: PlaneData, cells: BoundaryCellSet, margin_cells: float = 2.0) -> float:
    """Weighted H1 seminorm on the footprint rim.

    Integrates (1-|y|^4)^(-1/2) |grad_tang F|^2 over the staircase rim,
    excluding cells with 1-|y|^2 below `margin_cells` * h where the weight
    is singular.  Tangential gradients are difference quotients along the
    rim adjacency graph.
    """
    grid = cells.grid
    h = grid.h
    coords = cells.coords()
    y2 = (coords[:, :-1] ** 2).sum(axis=1)
    keep = 1.0 - y2 >= margin_cells * h
    weight = np.zeros(cells.ncells)
    weight[keep] = 1.0 / np.sqrt(1.0 - y2[keep] ** 2)
    fvals = F.values[cells.index_tuple()]
    ia, ib, dist = _rim_adjacency(cells)
    if ia.size == 0:
        return 0.0
    diff2 = ((fvals[ia] - fvals[ib]) / dist) ** 2
    # distribute each pair's contribution to both cells, average by degree
    grad2 = np.zeros(cells.ncells)
    deg = np.zeros(cells.ncells)
    np.add.at(grad2, ia, diff2)
    np.add.at(grad2, ib, diff2)
    np.add.at(deg, ia, 1.0)
    np.add.at(deg, ib, 1.0)
    nz = deg > 0
    grad2[nz] /= deg[nz]
    return float(np.sqrt((weight * grad2 * cells.area_weight).sum()))


def trace_l2_norm(trace: BoundaryTrace) -> float:
    act = trace.active
    w = trace.cells.area_weight[None, :] * trace.dt
    dens = np.where(act, trace.values, 0.0) ** 2
    return float(np.sqrt((dens * w).sum()))


def trace_h1_norm(trace: BoundaryTrace) -> float:
    """Discrete H1 norm on the active slant region of the lateral boundary.

    Value, centered time-difference (between actively recorded neighbors),
    and adjacency-graph tangential difference terms, weighted by the cell
    quadrature weights and dt.
    """
    act = trace.active
    vals = np.where(act, trace.values, 0.0)
    w = trace.cells.area_weight[None, :] * trace.dt
    dens = vals**2

    dt_pairs = act[1:] & act[:-1]
    tdiff = (trace.values[1:] - trace.values[:-1]) / trace.dt
    dens_t = np.where(dt_pairs, tdiff, 0.0) ** 2
    # assign the one-sided difference energy to the later sample
    dens[1:] += dens_t

    ia, ib, dist = _rim_adjacency(trace.cells)
    if ia.size:
        both = act[:, ia] & act[:, ib]
        gdiff = (trace.values[:, ia] - trace.values[:, ib]) / dist[None, :]
        g2 = np.where(both, gdiff, 0.0) ** 2
        half = np.zeros_like(dens)
        np.add.at(half.T, ia, 0.5 * g2.T)
        np.add.at(half.T, ib, 0.5 * g2.T)
        dens += half
    return float(np.sqrt((dens * w).sum()))
