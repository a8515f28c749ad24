"""Core wave-equation kernels.

Second-order leapfrog for (eta * u_tt - lap u) = S on the box, with optional
sponge absorption near the box faces; a Dirichlet cylinder solver marching in
either time direction (used backward for time reversal and forward for the
reversibility check); conjugate-gradient harmonic extension of staircase
boundary data; and the cosine mollifier standing in for the impulsive source
concentrated on {t = z}.

The fused interior stencil update is delegated to `slantwave.kernels`, which
picks the compiled extension when it is built and the NumPy fallback
otherwise.  All drivers are deterministic: identical inputs produce
bit-identical outputs on either backend.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from . import kernels
from .grid import BoundaryCellSet, GridSpec

__all__ = [
    "ScalarField",
    "WaveState",
    "SpongeProfile",
    "MollifiedImpulse",
    "SolverBlowupError",
    "HarmonicSolveError",
    "CflError",
    "laplacian",
    "leapfrog_step",
    "cfl_time_step",
    "run_free_space",
    "run_cylinder",
    "harmonic_extension",
    "mollified_impulse",
    "SlabImpulseSource",
    "PolynomialFrontSource",
    "TraceRecorder",
    "SlantRecorder",
]


class SolverBlowupError(RuntimeError):
    """Raised when a marching solve produces non-finite values."""

    def __init__(self, step: int, t: float):
        super().__init__(f"non-finite field at step {step}, t={t:.6g}")
        self.step = step
        self.t = t


class HarmonicSolveError(RuntimeError):
    def __init__(self, residual: float, iterations: int):
        super().__init__(
            f"harmonic extension did not converge: residual {residual:.3e} "
            f"after {iterations} iterations"
        )
        self.residual = residual


class CflError(ValueError):
    pass


@dataclass(frozen=True)
class ScalarField:
    values: np.ndarray
    grid: GridSpec

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}"
            )


@dataclass(frozen=True)
class WaveState:
    u_prev: ScalarField
    u_curr: ScalarField
    t_index: int
    dt: float


@dataclass(frozen=True)
class SpongeProfile:
    """Absorbing layer: exponential damping ramped polynomially from the faces.

    Damping is exactly zero for |x_i| <= L - width_cells*h on every axis.
    """

    width_cells: int
    strength: float
    ramp: int = 3

    def damp_factors(self, grid: GridSpec, dt: float) -> np.ndarray:
        w = self.width_cells * grid.h
        inner = grid.box_half_width - w
        depth = np.zeros(grid.shape)
        for a in range(grid.n):
            d = (np.abs(grid.coords(a)) - inner) / w
            depth = np.maximum(depth, np.clip(d, 0.0, 1.0))
        return np.exp(-self.strength * depth**self.ramp * dt)


@dataclass(frozen=True)
class MollifiedImpulse:
    """Cosine bump psi_eps(s) = (1 + cos(pi s/eps)) / (2 eps) on |s| <= eps.

    Unit mass, even (zero first moment), C^1 at the endpoints.
    """

    eps: float

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        inside = np.abs(s) < self.eps
        out[inside] = (1.0 + np.cos(np.pi * s[inside] / self.eps)) / (2.0 * self.eps)
        return out


def mollified_impulse(eps: float, dt: float | None = None) -> MollifiedImpulse:
    if dt is not None and eps < 2.0 * dt:
        raise ValueError(f"mollifier width {eps} below resolution 2*dt={2 * dt}")
    if eps <= 0:
        raise ValueError("mollifier width must be positive")
    return MollifiedImpulse(eps=eps)


def laplacian(values: np.ndarray, h: float) -> np.ndarray:
    """Second-order centered Laplacian with zero padding outside the box."""
    n = values.ndim
    nbsum = np.zeros_like(values)
    for a in range(n):
        lo = [slice(None)] * n
        hi = [slice(None)] * n
        lo[a] = slice(None, -1)
        hi[a] = slice(1, None)
        nbsum[tuple(lo)] += values[tuple(hi)]
        nbsum[tuple(hi)] += values[tuple(lo)]
    return (nbsum - (2.0 * n) * values) / (h * h)


def laplacian_field(u: ScalarField) -> ScalarField:
    return ScalarField(values=laplacian(u.values, u.grid.h), grid=u.grid)


def cfl_time_step(h: float, n: int, c_max: float = 1.0, cfl: float = 0.9) -> float:
    if not 0.0 < cfl <= 1.0:
        raise CflError(f"cfl must lie in (0, 1], got {cfl}")
    return cfl * h / (c_max * np.sqrt(n))


def _check_cfl(dt: float, h: float, n: int, c_max: float):
    limit = h / (c_max * np.sqrt(n))
    if dt > limit * (1.0 + 1e-12):
        raise CflError(f"dt={dt:.4g} violates the stability bound {limit:.4g}")


def leapfrog_step(
    state: WaveState,
    eta: ScalarField | None = None,
    source: ScalarField | None = None,
    sponge_factors: np.ndarray | None = None,
) -> WaveState:
    """One leapfrog step: u_next = 2 u - u_prev + dt^2 (lap u + S)/eta.

    Box edge points are pinned to zero (the wave must never reach them; box
    sizing and the sponge guarantee that in the drivers).
    """
    grid = state.u_curr.grid
    c_max = 1.0 if eta is None else float(np.sqrt(1.0 / eta.values.min()))
    _check_cfl(state.dt, grid.h, grid.n, c_max)
    up = state.u_prev.values
    uc = state.u_curr.values
    un = np.zeros_like(uc)
    dt2 = state.dt * state.dt
    coef = dt2 / (grid.h * grid.h)
    inv_eta = None if eta is None else 1.0 / eta.values
    kernels.step_interior(up, uc, un, coef, inv_eta)
    if source is not None:
        core = (slice(1, -1),) * grid.n
        s = dt2 * source.values[core]
        if inv_eta is not None:
            s = s * inv_eta[core]
        un[core] += s
    if sponge_factors is not None:
        un *= sponge_factors
    return WaveState(
        u_prev=state.u_curr,
        u_curr=ScalarField(values=un, grid=grid),
        t_index=state.t_index + 1,
        dt=state.dt,
    )


class SlabImpulseSource:
    """Source field(x) * psi_eps(t - z): active only on a thin z slab."""

    def __init__(self, field: np.ndarray, impulse: MollifiedImpulse, z_axis: np.ndarray):
        self.field = field
        self.impulse = impulse
        self.z_axis = z_axis

    def add_to(self, un: np.ndarray, t: float, dt2: float, inv_eta: np.ndarray | None):
        z = self.z_axis
        j0 = int(np.searchsorted(z, t - self.impulse.eps, side="right"))
        j1 = int(np.searchsorted(z, t + self.impulse.eps, side="left"))
        if j1 <= j0:
            return
        psi = self.impulse(t - z[j0:j1])
        slab = (Ellipsis, slice(j0, j1))
        add = (dt2 * self.field[slab]) * psi
        if inv_eta is not None:
            add = add * inv_eta[slab]
        un[slab] += add


class PolynomialFrontSource:
    """Source field(x) * (t - z)_+^N: everything below the front is active."""

    def __init__(self, field: np.ndarray, power: int, z_axis: np.ndarray):
        self.field = field
        self.power = power
        self.z_axis = z_axis
        nz = np.nonzero(np.any(field != 0.0, axis=tuple(range(field.ndim - 1))))[0]
        self.j_lo = int(nz[0]) if nz.size else 0
        self.j_hi = int(nz[-1]) + 1 if nz.size else 0

    def add_to(self, un: np.ndarray, t: float, dt2: float, inv_eta: np.ndarray | None):
        z = self.z_axis
        j1 = min(int(np.searchsorted(z, t, side="right")), self.j_hi)
        j0 = self.j_lo
        if j1 <= j0:
            return
        ramp = (t - z[j0:j1]) ** self.power if self.power > 0 else np.ones(j1 - j0)
        slab = (Ellipsis, slice(j0, j1))
        add = (dt2 * self.field[slab]) * ramp
        if inv_eta is not None:
            add = add * inv_eta[slab]
        un[slab] += add


class TraceRecorder:
    """Collects u at the boundary cells at every time level."""

    def __init__(self, cells_index: tuple, nt: int):
        self.values = np.zeros((nt, cells_index[0].shape[0]))
        self.cells_index = cells_index

    def record(self, m: int, u: np.ndarray):
        self.values[m] = u[self.cells_index]


class SlantRecorder:
    """Captures u on {t = z} by linear interpolation as the march crosses it.

    Operates on a view of the solver array covering the domain grid, so the
    recorded plane is a full domain-shaped array.
    """

    def __init__(self, domain_shape: tuple, z_axis: np.ndarray):
        self.plane = np.zeros(domain_shape)
        self.z_axis = z_axis

    def record_step(self, u_old, u_new, t_old: float, t_new: float):
        z = self.z_axis
        if t_new > t_old:  # upward march captures z in (t_old, t_new]
            j0 = int(np.searchsorted(z, t_old, side="right"))
            j1 = int(np.searchsorted(z, t_new, side="right"))
        else:  # downward march captures z in [t_new, t_old)
            j0 = int(np.searchsorted(z, t_new, side="left"))
            j1 = int(np.searchsorted(z, t_old, side="left"))
        if j1 <= j0:
            return
        w = (z[j0:j1] - t_old) / (t_new - t_old)
        slab = (Ellipsis, slice(j0, j1))
        self.plane[slab] = u_old[slab] + w * (u_new[slab] - u_old[slab])


def run_free_space(
    box: GridSpec,
    t0: float,
    t1: float,
    dt: float,
    eta: np.ndarray | None = None,
    sources: list | None = None,
    trace_recorder: TraceRecorder | None = None,
    slant_recorder: SlantRecorder | None = None,
    slant_view: tuple | None = None,
    init: tuple[np.ndarray, np.ndarray] | None = None,
    sponge: np.ndarray | None = None,
    extra_step_for_velocity: bool = False,
    nan_check_every: int = 50,
):
    """March the free-space leapfrog from t0 to t1.

    Returns (u_prev, u_curr, ut) where u_curr is the field at t1 and ut is
    the centered time derivative at t1 when `extra_step_for_velocity` is set
    (one step beyond t1 is taken to form it), else None.
    """
    c_max = 1.0 if eta is None else float(np.sqrt(1.0 / eta.min()))
    _check_cfl(dt, box.h, box.n, c_max)
    steps = int(round((t1 - t0) / dt))
    if abs(t0 + steps * dt - t1) > 1e-9 * max(1.0, abs(t1)):
        raise ValueError("time range is not an integer number of steps")
    if init is None:
        up = box.zeros()
        uc = box.zeros()
    else:
        up = init[0].copy()
        uc = init[1].copy()
    un = box.zeros()
    inv_eta = None if eta is None else 1.0 / eta
    dt2 = dt * dt
    coef = dt2 / (box.h * box.h)
    sources = sources or []

    if trace_recorder is not None:
        trace_recorder.record(0, uc)
    t = t0
    total = steps + (1 if extra_step_for_velocity else 0)
    u_at_t1 = None
    for m in range(total):
        kernels.step_interior(up, uc, un, coef, inv_eta)
        for src in sources:
            src.add_to(un, t, dt2, inv_eta)
        if sponge is not None:
            un *= sponge
        t_new = t0 + (m + 1) * dt
        if slant_recorder is not None:
            view = slant_view if slant_view is not None else (Ellipsis,)
            slant_recorder.record_step(uc[view], un[view], t, t_new)
        if trace_recorder is not None and m + 1 <= steps:
            trace_recorder.record(m + 1, un)
        up, uc, un = uc, un, up
        t = t_new
        if (m + 1) % nan_check_every == 0 and not np.isfinite(uc).all():
            raise SolverBlowupError(m + 1, t)
        if m + 1 == steps:
            u_at_t1 = uc
    if not np.isfinite(uc).all():
        raise SolverBlowupError(total, t)
    ut = None
    if extra_step_for_velocity:
        # after the loop: uc is u(t1+dt), up is u(t1), un holds u(t1-dt)
        ut = (uc - un) / (2.0 * dt)
        return un.copy(), u_at_t1, ut
    return up, uc, ut


def run_cylinder(
    grid: GridSpec,
    interior: np.ndarray,
    cells: BoundaryCellSet,
    dirichlet,
    t_start: float,
    t_stop: float,
    dt: float,
    start_u: np.ndarray,
    start_ut: np.ndarray | None = None,
    start_pair: tuple[np.ndarray, np.ndarray] | None = None,
    record_slant: bool = True,
    nan_check_every: int = 50,
):
    """Dirichlet solve on the cylinder (unit ball) x [t_stop, t_start].

    Marches from t_start toward t_stop (either direction).  Boundary cells
    are overwritten with `dirichlet(t)` after every step, points outside the
    ball stay at zero, and the solution is sampled on {t = z} on the fly.

    The second time level is built from (start_u, start_ut) by the Taylor
    step u(t -+ dt) = u -+ dt*ut + dt^2/2 * lap u, unless an explicit
    `start_pair` (u at t_start, u at t_start -+ dt) is supplied (used by the
    reversibility check).

    Returns (plane, (u_second_last, u_last)) where plane is the slant sample
    (domain-shaped array) or None.
    """
    _check_cfl(dt, grid.h, grid.n, 1.0)
    sign = -1.0 if t_stop < t_start else 1.0
    steps = int(round(abs(t_start - t_stop) / dt))
    if abs(abs(t_start - t_stop) - steps * dt) > 1e-9:
        raise ValueError("cylinder time range is not an integer number of steps")
    cells_idx = cells.index_tuple()
    outside = ~(interior.copy())
    outside[cells_idx] = False  # outside = complement of ball (interior + cells)

    if start_pair is not None:
        uc = start_pair[0].copy()
        up_next = start_pair[1].copy()
    else:
        if start_ut is None:
            raise ValueError("either start_ut or start_pair is required")
        uc = start_u.copy()
        up_next = (
            start_u
            + sign * dt * start_ut
            + 0.5 * dt * dt * laplacian(start_u, grid.h)
        )
        up_next[outside] = 0.0
        up_next[cells_idx] = dirichlet(t_start + sign * dt)
    uc[outside] = 0.0

    rec = SlantRecorder(grid.shape, grid.axis()) if record_slant else None
    if rec is not None:
        rec.record_step(uc, up_next, t_start, t_start + sign * dt)

    # state: previous level "up" (earlier in march order) and current "uc"
    up = uc
    uc = up_next
    un = grid.zeros()
    dt2 = dt * dt
    coef = dt2 / (grid.h * grid.h)
    t = t_start + sign * dt
    for m in range(1, steps):
        kernels.step_interior(up, uc, un, coef, None)
        un[outside] = 0.0
        t_new = t_start + sign * (m + 1) * dt
        un[cells_idx] = dirichlet(t_new)
        if rec is not None:
            rec.record_step(uc, un, t, t_new)
        up, uc, un = uc, un, up
        t = t_new
        if (m + 1) % nan_check_every == 0 and not np.isfinite(uc).all():
            raise SolverBlowupError(m + 1, t)
    if not np.isfinite(uc).all():
        raise SolverBlowupError(steps, t)
    plane = rec.plane if rec is not None else None
    return plane, (up.copy(), uc.copy())


def _neighbor_sum(values: np.ndarray) -> np.ndarray:
    n = values.ndim
    out = np.zeros_like(values)
    for a in range(n):
        lo = [slice(None)] * n
        hi = [slice(None)] * n
        lo[a] = slice(None, -1)
        hi[a] = slice(1, None)
        out[tuple(lo)] += values[tuple(hi)]
        out[tuple(hi)] += values[tuple(lo)]
    return out


def harmonic_extension(
    boundary_values: np.ndarray,
    interior: np.ndarray,
    cells: BoundaryCellSet,
    tol: float = 1e-12,
    max_iter: int = 20000,
) -> np.ndarray:
    """Discrete harmonic extension of staircase Dirichlet data into the ball.

    Solves the 5/7-point Laplace system by conjugate gradients and clips the
    result to the boundary data range, which the exact discrete solution
    satisfies (maximum principle); clipping removes solver-tolerance wiggle.
    Returns a full-grid array, zero outside the ball.
    """
    if cells.ncells == 0:
        raise ValueError("boundary cell set is empty")
    grid = cells.grid
    shape = grid.shape
    n_unknown = int(np.count_nonzero(interior))
    bc = np.zeros(shape)
    bc[cells.index_tuple()] = boundary_values

    if n_unknown == 0:
        return bc

    two_n = 2.0 * grid.n

    def matvec(x):
        full = np.zeros(shape)
        full[interior] = x
        return two_n * x - _neighbor_sum(full)[interior]

    rhs = _neighbor_sum(bc)[interior]
    op = LinearOperator((n_unknown, n_unknown), matvec=matvec)
    try:
        x, info = cg(op, rhs, rtol=tol, atol=0.0, maxiter=max_iter)
    except TypeError:  # older scipy spells rtol as tol
        x, info = cg(op, rhs, tol=tol, atol=0.0, maxiter=max_iter)
    if info != 0:
        res = float(np.linalg.norm(matvec(x) - rhs) / max(np.linalg.norm(rhs), 1e-300))
        raise HarmonicSolveError(res, max_iter)
    out = bc
    out[interior] = np.clip(x, boundary_values.min(), boundary_values.max())
    return out
