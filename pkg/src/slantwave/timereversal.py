"""Modified time reversal.

Given a boundary trace measured on {t >= z} up to the final time T, the
reversal pipeline (1) extends the trace below the slant by a per-cell Taylor
polynomial built from one-sided derivative estimates at t = z+, (2) blends
the extension toward its final-time value on a short window so the backward
solve starts from compatible corner data, (3) harmonically extends the
final-time boundary values into the ball, and (4) solves the wave equation
backward on the cylinder with the blended Dirichlet data and final state
(phi_0, 0), sampling the result on the characteristic plane.

The whole map is linear in the trace and bounded uniformly in the data; its
composition with the forward plane-data map is the contraction that drives
the Neumann-series reconstruction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig, workspace
from .forward import BoundaryTrace, PlaneData, polynomial_backfill
from .grid import BoundaryCellSet, GridSpec
from .wave import harmonic_extension, run_cylinder

__all__ = [
    "ExtendedTrace",
    "SmoothedTrace",
    "chi0",
    "extend_trace",
    "smooth_final_time",
    "time_reverse",
]


@dataclass
class ExtendedTrace:
    """Trace extended from {t >= z} to the full cylinder time range."""

    values: np.ndarray
    t0: float
    dt: float
    cells: BoundaryCellSet
    grid: GridSpec
    k_order: int

    @property
    def t_final(self) -> float:
        return self.t0 + self.dt * (self.values.shape[0] - 1)

    def interp(self, t: float) -> np.ndarray:
        pos = (t - self.t0) / self.dt
        m = int(np.floor(pos))
        m = min(max(m, 0), self.values.shape[0] - 2)
        w = pos - m
        return (1.0 - w) * self.values[m] + w * self.values[m + 1]


@dataclass
class SmoothedTrace(ExtendedTrace):
    eps_smooth: float = 0.0


def chi0(s):
    """C^2 cutoff: 1 on |s| <= 1, 0 on |s| >= 2, quintic in between."""
    s = np.abs(np.asarray(s, dtype=float))
    u = np.clip(s - 1.0, 0.0, 1.0)
    return 1.0 - u**3 * (10.0 - 15.0 * u + 6.0 * u * u)


def extend_trace(h: BoundaryTrace, k_order: int) -> ExtendedTrace:
    """Fill t < z per cell with the Taylor polynomial anchored at t = z+.

    The degree-k polynomial interpolating the first k+1 active samples is
    evaluated below the slant; it reproduces polynomial traces exactly and
    is C^1 across the slant at finite-difference accuracy.
    """
    active = h.active
    nt = h.nt
    anchors = np.argmax(active, axis=0)
    counts = nt - anchors
    if (counts < k_order + 2).any():
        raise ValueError(
            f"extension of order {k_order} needs at least {k_order + 2} active "
            "samples at every boundary cell"
        )
    vals = polynomial_backfill(
        h.values, h.cells.unit_z, h.t0, h.dt, anchors, order=k_order
    )
    return ExtendedTrace(
        values=vals,
        t0=h.t0,
        dt=h.dt,
        cells=h.cells,
        grid=h.grid,
        k_order=k_order,
    )


def smooth_final_time(ext: ExtendedTrace, eps_smooth: float) -> SmoothedTrace:
    """Blend toward the final-time value on T - t <= 2*eps_smooth.

    u_eps(x,t) = chi0((T-t)/eps) u(x,T) + (1 - chi0((T-t)/eps)) u(x,t); the
    result is constant in t on the last eps window, so its final-time time
    derivative vanishes and the backward solve's (phi_0, 0) data is
    compatible with the Dirichlet trace at the corner.
    """
    T = ext.t_final
    t = ext.t0 + ext.dt * np.arange(ext.values.shape[0])
    w = chi0((T - t) / eps_smooth)[:, None]
    vals = w * ext.values[-1][None, :] + (1.0 - w) * ext.values
    return SmoothedTrace(
        values=vals,
        t0=ext.t0,
        dt=ext.dt,
        cells=ext.cells,
        grid=ext.grid,
        k_order=ext.k_order,
        eps_smooth=eps_smooth,
    )


def time_reverse(h: BoundaryTrace, cfg: RunConfig) -> PlaneData:
    """Approximate inverse of the plane-data trace map.

    Returns the backward Dirichlet solve sampled on {t = z}, as 'ramp' plane
    data (values on the footprint rim are retained).
    """
    ws = workspace(cfg)
    ext = extend_trace(h, cfg.k_order)
    sm = smooth_final_time(ext, ws.eps_smooth)
    T = sm.t_final
    phi0 = harmonic_extension(
        sm.values[-1],
        ws.interior,
        ws.cells,
        tol=cfg.harmonic_tol,
        max_iter=cfg.harmonic_max_iter,
    )
    steps = int(np.ceil((T + 1.0) / ws.dt - 1e-9))
    t_stop = T - steps * ws.dt
    plane, _ = run_cylinder(
        ws.grid,
        ws.interior,
        ws.cells,
        sm.interp,
        t_start=T,
        t_stop=t_stop,
        dt=ws.dt,
        start_u=phi0,
        start_ut=np.zeros_like(phi0),
        record_slant=True,
    )
    return PlaneData(values=plane, grid=ws.grid, kind="ramp")
