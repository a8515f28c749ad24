"""Measurement maps of the fixed-angle scattering model.

The incident direction is +z and the wavefront lives on the characteristic
plane {t = z} parametrized by x = (y, z).  This module provides:

* the characteristic data F(y,z) = -1/2 * integral_{-inf}^z f(y,s) ds created
  by a medium perturbation f, together with the slant derivative Z (so that
  Z F = -f/2, and conversely f = -2 Z F);
* the linearized (Born) boundary trace: the field of
  (d_tt - lap) U = -f(x) psi_eps(t - z) recorded on the staircase boundary
  and restricted to {t > z} (open) or {t >= z} (closed, the plane-data map);
* the progressive wave expansion U = sum_j a_j(x) (t-z)_+^j + R_N, an
  independent forward route used as a cross-validation oracle;
* the full nonlinear scattered trace for a sound speed eta: the solution of
  (eta d_tt - lap) V = -(eta - 1) psi_eps(t - z), whose trace equals the
  difference of nonlinear measurements against the homogeneous background,
  and whose linearization in (eta - 1) is exactly the Born trace above.

Mollified traces are polluted in the band |t - z| <= eps; every trace
produced here is repaired there by one-sided polynomial extrapolation from
the clean region t >= z + eps before the slant mask is applied.  The repair
is a fixed linear map of the samples, so all maps remain exactly linear.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig, Workspace, workspace
from .grid import BoundaryCellSet, GridSpec, slant_mask
from .wave import (
    PolynomialFrontSource,
    ScalarField,
    SlabImpulseSource,
    TraceRecorder,
    laplacian,
    run_free_space,
)

__all__ = [
    "PlaneData",
    "SourcePerturbation",
    "SpeedModel",
    "BoundaryTrace",
    "PweExpansion",
    "char_data_from_source",
    "slant_derivative",
    "source_from_plane",
    "born_trace",
    "trace_from_plane",
    "pwe_coefficients",
    "expansion_trace",
    "scattered_field_trace",
    "trace_like",
    "trace_axpy",
]


def _canonical_plane(values: np.ndarray, grid: GridSpec, kind: str) -> np.ndarray:
    """Replace values outside the ball by the canonical continuation.

    'compact' data vanish outside; 'ramp' data continue constantly upward in
    z from the top inside point of each column (the slant derivative
    vanishes outside the ball footprint) and vanish below and laterally.
    """
    inside = grid.radius_sq() < 1.0
    out = np.where(inside, values, 0.0)
    if kind == "ramp":
        nz = values.shape[-1]
        has = inside.any(axis=-1)
        last = nz - 1 - np.argmax(inside[..., ::-1], axis=-1)
        top = np.take_along_axis(out, last[..., None], axis=-1)
        above = (np.arange(nz) > last[..., None]) & has[..., None]
        out = np.where(above, top, out)
    return out


@dataclass
class PlaneData:
    """Function on the characteristic plane over the ball footprint.

    kind='compact': supported in the closed footprint, zero on its rim
    (enforced by the error-operator path); kind='ramp': general data whose
    slant derivative vanishes outside the footprint, stored with the
    constant-in-z continuation above the ball.
    """

    values: np.ndarray
    grid: GridSpec
    kind: str = "ramp"

    def __post_init__(self):
        if self.kind not in ("compact", "ramp"):
            raise ValueError(f"unknown plane-data kind '{self.kind}'")
        if self.values.shape != self.grid.shape:
            raise ValueError("plane data shape does not match grid")
        if not np.isfinite(self.values).all():
            raise ValueError("plane data contains non-finite values")
        self.values = _canonical_plane(self.values, self.grid, self.kind)

    def scaled(self, c: float) -> "PlaneData":
        return PlaneData(values=c * self.values, grid=self.grid, kind=self.kind)

    def minus(self, other: "PlaneData") -> "PlaneData":
        kind = "compact" if self.kind == other.kind == "compact" else "ramp"
        return PlaneData(values=self.values - other.values, grid=self.grid, kind=kind)


@dataclass
class SourcePerturbation:
    """Medium perturbation f = eta - 1, compactly supported inside the ball."""

    values: np.ndarray
    grid: GridSpec
    support_radius: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError("source shape does not match grid")
        r2 = self.grid.radius_sq()
        nz = self.values != 0.0
        if nz.any():
            radius = float(np.sqrt(r2[nz].max()))
        else:
            radius = 0.0
        if radius > 1.0 + 1e-12:
            raise ValueError(
                f"source support radius {radius:.4f} exceeds the unit ball"
            )
        self.support_radius = radius
        self.sigma = max(1.0 - radius, 0.0)


@dataclass
class SpeedModel:
    """Sound speed coefficient eta with ellipticity bounds and support margin."""

    eta: np.ndarray
    grid: GridSpec
    M: float
    sigma: float = 0.0

    def __post_init__(self):
        if self.eta.shape != self.grid.shape:
            raise ValueError("speed shape does not match grid")
        if self.eta.min() < 1.0 / self.M - 1e-12 or self.eta.max() > self.M + 1e-12:
            raise ValueError("eta violates the ellipticity bounds [1/M, M]")
        dev = SourcePerturbation(values=self.eta - 1.0, grid=self.grid)
        self.sigma = dev.sigma

    @classmethod
    def from_perturbation(cls, f: SourcePerturbation, M: float) -> "SpeedModel":
        return cls(eta=1.0 + f.values, grid=f.grid, M=M)


@dataclass
class BoundaryTrace:
    """Time series on the staircase boundary cells, slant-masked."""

    values: np.ndarray  # (nt, ncells)
    t0: float
    dt: float
    cells: BoundaryCellSet
    grid: GridSpec
    closed: bool = False

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != self.cells.ncells:
            raise ValueError("trace shape does not match the boundary cell set")
        self._active = None

    @property
    def nt(self) -> int:
        return self.values.shape[0]

    @property
    def t_final(self) -> float:
        return self.t0 + self.dt * (self.nt - 1)

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.nt)

    @property
    def active(self) -> np.ndarray:
        if self._active is None:
            self._active = slant_mask(
                self.cells, self.t0, self.dt, self.nt, closed=self.closed
            ).active
        return self._active

    def interp(self, t: float) -> np.ndarray:
        """Per-cell values at time t, linear in time, clamped at the ends."""
        pos = (t - self.t0) / self.dt
        m = int(np.floor(pos))
        m = min(max(m, 0), self.nt - 2)
        w = pos - m
        return (1.0 - w) * self.values[m] + w * self.values[m + 1]


def trace_like(trace: BoundaryTrace, values: np.ndarray, closed=None) -> BoundaryTrace:
    return BoundaryTrace(
        values=values,
        t0=trace.t0,
        dt=trace.dt,
        cells=trace.cells,
        grid=trace.grid,
        closed=trace.closed if closed is None else closed,
    )


def trace_axpy(a: float, x: BoundaryTrace, b: float, y: BoundaryTrace) -> BoundaryTrace:
    if x.values.shape != y.values.shape or abs(x.t0 - y.t0) > 1e-12:
        raise ValueError("traces are not on the same time grid")
    return trace_like(x, a * x.values + b * y.values)


def _cumtrapz_z(values: np.ndarray, h: float) -> np.ndarray:
    avg = 0.5 * (values[..., :-1] + values[..., 1:])
    out = np.zeros_like(values)
    np.cumsum(avg, axis=-1, out=out[..., 1:])
    out[..., 1:] *= h
    return out


def char_data_from_source(f: SourcePerturbation) -> PlaneData:
    """Characteristic data F(y,z) = -1/2 * integral_{-inf}^{z} f(y,s) ds."""
    F = -0.5 * _cumtrapz_z(f.values, f.grid.h)
    return PlaneData(values=F, grid=f.grid, kind="ramp")


def slant_derivative(F: PlaneData) -> ScalarField:
    """Derivative of z -> F(y,z,z) along the slant (central differences)."""
    v = F.values
    h = F.grid.h
    out = np.zeros_like(v)
    out[..., 1:-1] = (v[..., 2:] - v[..., :-2]) / (2.0 * h)
    out[..., 0] = (v[..., 1] - v[..., 0]) / h
    out[..., -1] = (v[..., -1] - v[..., -2]) / h
    return ScalarField(values=out, grid=F.grid)


def source_from_plane(F: PlaneData) -> SourcePerturbation:
    """Recover the physical source f = -2 ZF, clipped to the closed ball.

    Exact inverse (up to quadrature) of char_data_from_source; it lets the
    plane-data trace map be computed with the impulsive-source solver alone,
    without a dedicated characteristic-surface marching scheme.
    """
    zf = slant_derivative(F).values
    f = -2.0 * zf
    f[F.grid.radius_sq() > 1.0] = 0.0
    return SourcePerturbation(values=f, grid=F.grid)


def polynomial_backfill(
    values: np.ndarray,
    z: np.ndarray,
    t0: float,
    dt: float,
    anchors: np.ndarray,
    order: int,
) -> np.ndarray:
    """Replace samples below per-cell anchor rows by one-sided extrapolation.

    For each cell a degree-`order` polynomial in (t - z) is fit through the
    `order`+1 samples starting at its anchor row; all earlier rows are
    replaced by the polynomial.  Fixed sample locations make this a linear
    map of the trace values.
    """
    nt, ncells = values.shape
    if (anchors + order).max() > nt - 1:
        raise ValueError("not enough samples above the slant for extrapolation")
    out = values.copy()
    t = t0 + dt * np.arange(nt)
    tau = t[anchors[None, :] + np.arange(order + 1)[:, None]] - z[None, :]
    A = tau.T[:, :, None] ** np.arange(order + 1)[None, None, :]
    b = np.take_along_axis(
        values, anchors[None, :] + np.arange(order + 1)[:, None], axis=0
    ).T
    coef = np.linalg.solve(A, b)  # (ncells, order+1)
    ma = int(anchors.max())
    if ma == 0:
        return out
    tgrid = t[:ma, None] - z[None, :]
    poly = np.full((ma, ncells), coef[:, order][None, :])
    for p in range(order - 1, -1, -1):
        poly = poly * tgrid + coef[:, p][None, :]
    fill = np.arange(ma)[:, None] < anchors[None, :]
    out[:ma] = np.where(fill, poly, out[:ma])
    return out


def _repair_band(
    values: np.ndarray, cells: BoundaryCellSet, t0: float, dt: float, eps: float
) -> np.ndarray:
    """Rebuild the mollifier-polluted band t < z + eps from clean samples."""
    z = cells.unit_z
    anchors = np.ceil((z + eps + 2.0 * dt - t0) / dt - 1e-9).astype(int)
    anchors = np.maximum(anchors, 0)
    return polynomial_backfill(values, z, t0, dt, anchors, order=2)


def _apply_slant_zero(trace: BoundaryTrace) -> BoundaryTrace:
    trace.values[~trace.active] = 0.0
    return trace


def _linear_forward(
    field_domain: np.ndarray,
    T: float,
    cfg: RunConfig,
    closed: bool,
    eta_domain: np.ndarray | None = None,
) -> BoundaryTrace:
    """Shared driver: march the mollified-impulse solve, record and repair."""
    ws = workspace(cfg)
    if T != cfg.T:
        raise ValueError("trace horizon must equal the configured final time T")
    box, off = ws.trace_box, ws.trace_off
    view = ws.domain_view(off)
    src_field = box.zeros()
    src_field[view] = field_domain
    inv_eta_box = None
    eta_box = None
    if eta_domain is not None:
        eta_box = np.ones(box.shape)
        eta_box[view] = eta_domain
    src = SlabImpulseSource(src_field, ws.impulse, box.axis())
    rec = TraceRecorder(ws.cells.index_tuple(offset=off), ws.nt)
    run_free_space(
        box,
        ws.t0,
        cfg.T,
        ws.dt,
        eta=eta_box,
        sources=[src],
        trace_recorder=rec,
        sponge=ws.sponge_factors(box),
    )
    del inv_eta_box
    vals = _repair_band(rec.values, ws.cells, ws.t0, ws.dt, ws.eps)
    trace = BoundaryTrace(
        values=vals,
        t0=ws.t0,
        dt=ws.dt,
        cells=ws.cells,
        grid=ws.grid,
        closed=closed,
    )
    return _apply_slant_zero(trace)


def born_trace(f: SourcePerturbation, T: float, cfg: RunConfig) -> BoundaryTrace:
    """Linearized scattering trace on {t > z} for the perturbation f."""
    return _linear_forward(-f.values, T, cfg, closed=False)


def trace_from_plane(F: PlaneData, T: float, cfg: RunConfig) -> BoundaryTrace:
    """Trace of the characteristic-data solve on {t >= z}.

    Computed by the exact reduction to the impulsive source -2 ZF.
    """
    f = source_from_plane(F)
    return _linear_forward(-f.values, T, cfg, closed=True)


@dataclass
class PweExpansion:
    """Progressive-expansion coefficients on the tall strip above the ball."""

    coeffs: list
    remainder_source: np.ndarray
    order: int
    strip_z: np.ndarray
    grid: GridSpec


def pwe_coefficients(f: SourcePerturbation, order: int, cfg: RunConfig) -> PweExpansion:
    """Coefficients a_0..a_N by iterated Laplacian + cumulative z-integral.

    a_0(y,z) = -1/2 int_{-inf}^{z} f(y,s) ds,
    a_{k+1}(y,z) = 1/(2(k+1)) int_{-inf}^{z} (lap a_k)(y,s) ds.

    Stored on a strip that extends the domain grid in z up to the top of the
    solver box: for sources with nonvanishing z-moments the coefficients
    continue (and may grow polynomially) above the ball, and the remainder
    solve needs them wherever its source is active.
    """
    ws = workspace(cfg)
    box, off = ws.trace_box, ws.trace_off
    nx = ws.grid.nx
    strip_z = box.axis()[off:]
    shape = f.values.shape[:-1] + (strip_z.shape[0],)
    f_strip = np.zeros(shape)
    f_strip[..., :nx] = f.values
    h = ws.grid.h
    coeffs = [-0.5 * _cumtrapz_z(f_strip, h)]
    for k in range(order):
        lap = laplacian(coeffs[-1], h)
        coeffs.append(_cumtrapz_z(lap, h) / (2.0 * (k + 1)))
    remainder_source = laplacian(coeffs[-1], h)
    remainder_source[..., -2:] = 0.0  # one-sided stencil junk at the strip top
    return PweExpansion(
        coeffs=coeffs,
        remainder_source=remainder_source,
        order=order,
        strip_z=strip_z,
        grid=ws.grid,
    )


def expansion_trace(
    f: SourcePerturbation, order: int, T: float, cfg: RunConfig
) -> BoundaryTrace:
    """Forward trace via the progressive expansion: the oracle route.

    The singular terms a_j (t-z)_+^j are evaluated analytically at the
    boundary cells; only the smooth remainder R_N, driven by
    (lap a_N)(t-z)_+^N, is integrated numerically.  No mollifier enters.
    """
    ws = workspace(cfg)
    if T != cfg.T:
        raise ValueError("trace horizon must equal the configured final time T")
    exp = pwe_coefficients(f, order, cfg)
    box, off = ws.trace_box, ws.trace_off
    nx = ws.grid.nx
    n = ws.grid.n
    rsrc = box.zeros()
    strip_view = tuple(slice(off, off + nx) for _ in range(n - 1)) + (
        slice(off, box.nx),
    )
    rsrc[strip_view] = exp.remainder_source
    src = PolynomialFrontSource(rsrc, order, box.axis())
    rec = TraceRecorder(ws.cells.index_tuple(offset=off), ws.nt)
    run_free_space(
        box,
        ws.t0,
        cfg.T,
        ws.dt,
        sources=[src],
        trace_recorder=rec,
        sponge=ws.sponge_factors(box),
    )
    vals = rec.values
    cell_idx = tuple(ws.cells.cells[:, a] for a in range(n))
    tau = ws.times()[:, None] - ws.cells.unit_z[None, :]
    front = tau >= 0.0
    for j, a_j in enumerate(exp.coeffs):
        aj_cells = a_j[cell_idx]
        if j == 0:
            vals = vals + front * aj_cells[None, :]
        else:
            vals = vals + np.where(front, tau, 0.0) ** j * aj_cells[None, :]
    trace = BoundaryTrace(
        values=vals, t0=ws.t0, dt=ws.dt, cells=ws.cells, grid=ws.grid, closed=True
    )
    return _apply_slant_zero(trace)


def scattered_field_trace(speed: SpeedModel, T: float, cfg: RunConfig) -> BoundaryTrace:
    """Nonlinear scattered trace on {t > z} for the sound speed eta.

    Solves (eta d_tt - lap) V = -(eta - 1) psi_eps(t - z); the trace of V is
    the difference between the measurement with medium eta and the
    homogeneous one, and its derivative in (eta - 1) at eta = 1 coincides
    exactly with the discrete Born trace (same kernels, same grid).
    """
    ws = workspace(cfg)
    if ws.eps >= speed.sigma:
        raise ValueError(
            f"mollifier width {ws.eps:.4g} must be below the support margin "
            f"sigma={speed.sigma:.4g}"
        )
    return _linear_forward(
        -(speed.eta - 1.0), T, cfg, closed=False, eta_domain=speed.eta
    )
