"""Error-operator iteration and inversion.

The time-reversal error operator is E = I - (reverse o forward) acting on
plane data.  On data vanishing at the footprint rim it is non-expansive in
the plane H1 seminorm and contracts when the final time is large (in odd
dimension it nearly vanishes by Huygens' principle), so plane data is
recovered from a measured trace by the geometric series

    F = B h + sum_j C^j (E (B h)),      h = forward trace of F,

where B is the time reversal map and C is E restricted to rim-vanishing
data.  The physical source then follows from the slant derivative, and a
frozen-Newton loop built on this linear inversion recovers a near-constant
sound speed from a single nonlinear trace.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig, workspace
from .forward import (
    BoundaryTrace,
    PlaneData,
    SourcePerturbation,
    SpeedModel,
    scattered_field_trace,
    source_from_plane,
    trace_axpy,
    trace_from_plane,
)
from .norms import plane_h1_seminorm, trace_l2_norm
from .timereversal import time_reverse

__all__ = [
    "NeumannReport",
    "NewtonReport",
    "NeumannDivergenceError",
    "NewtonStallError",
    "reversal_error",
    "contraction_step",
    "power_iteration_ratios",
    "reconstruct_plane_data",
    "reconstruct_source",
    "newton_invert",
]


class NeumannDivergenceError(RuntimeError):
    def __init__(self, report: "NeumannReport"):
        super().__init__(
            "Neumann term norms increased for three consecutive terms; "
            f"history: {report.term_norms}"
        )
        self.report = report


class NewtonStallError(RuntimeError):
    def __init__(self, report: "NewtonReport"):
        super().__init__(
            "Newton data misfit increased twice at the minimum damping step; "
            f"misfit history: {report.misfit_history}"
        )
        self.report = report


@dataclass
class NeumannReport:
    term_norms: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    rim_residuals: list = field(default_factory=list)
    iterations_used: int = 0
    converged: bool = False


@dataclass
class NewtonReport:
    misfit_history: list = field(default_factory=list)
    eta_error_history: list = field(default_factory=list)
    step_history: list = field(default_factory=list)
    converged: bool = False


def _enforce_compact(values: np.ndarray, cfg: RunConfig) -> PlaneData:
    ws = workspace(cfg)
    out = values.copy()
    out[ws.cells.index_tuple()] = 0.0
    return PlaneData(values=out, grid=ws.grid, kind="compact")


def reversal_error(
    F: PlaneData, T: float, cfg: RunConfig, enforce_rim: bool = True
) -> tuple[PlaneData, float]:
    """One application of I - (reverse o forward) to plane data.

    Returns the error and the pre-enforcement rim residual max|.| at the
    boundary cells; the continuum operator annihilates the rim exactly, so
    the discrete output is forced to zero there (recorded as a diagnostic)
    unless `enforce_rim` is disabled (the raw map is used by the
    commutation check, which relies on exact linear composition).
    """
    ws = workspace(cfg)
    back = time_reverse(trace_from_plane(F, T, cfg), cfg)
    diff = F.values - back.values
    rim_residual = float(np.abs(diff[ws.cells.index_tuple()]).max())
    if enforce_rim:
        return _enforce_compact(diff, cfg), rim_residual
    return PlaneData(values=diff, grid=ws.grid, kind="ramp"), rim_residual


def contraction_step(F: PlaneData, T: float, cfg: RunConfig) -> tuple[PlaneData, float]:
    """Error operator restricted to rim-vanishing data (the series iterate)."""
    ws = workspace(cfg)
    if F.kind != "compact":
        raise ValueError("contraction step requires rim-vanishing ('compact') data")
    rim = float(np.abs(F.values[ws.cells.index_tuple()]).max())
    if rim > 0.0:
        raise ValueError(f"input is not zero on the footprint rim (max {rim:.3e})")
    return reversal_error(F, T, cfg, enforce_rim=True)


def power_iteration_ratios(
    seed: PlaneData, iters: int, T: float, cfg: RunConfig
) -> list[float]:
    """Successive norm ratios under the contraction: a lower-bound witness.

    The supremum of the tail underestimates the true operator norm; it is
    reported as a witness, not as the norm itself.
    """
    cur = seed
    n0 = plane_h1_seminorm(cur)
    if n0 == 0.0:
        raise ValueError("power iteration seed has zero seminorm")
    ratios = []
    prev = n0
    for _ in range(iters):
        cur, _ = contraction_step(cur, T, cfg)
        nn = plane_h1_seminorm(cur)
        ratios.append(nn / prev)
        if nn < 1e-12 * n0:
            break
        prev = nn
    return ratios


def reconstruct_plane_data(
    h: BoundaryTrace,
    cfg: RunConfig,
    max_terms: int | None = None,
    tol: float | None = None,
    compute_residual: bool = False,
) -> tuple[PlaneData, NeumannReport]:
    """Neumann-series inversion of the forward trace map.

    F_hat = B h + sum_{j>=0} C^j (E(B h)), truncated when the term seminorm
    falls below tol * |B h| or after max_terms terms.  Three consecutive
    term-norm increases abort the sum (contraction failure diagnostic).
    """
    max_terms = cfg.series_max_terms if max_terms is None else max_terms
    tol = cfg.series_tol if tol is None else tol
    T = cfg.T
    report = NeumannReport()
    bh = time_reverse(h, cfg)
    base = plane_h1_seminorm(bh)
    total = bh.values.copy()
    if base == 0.0:
        report.converged = True
        return PlaneData(values=total, grid=bh.grid, kind="ramp"), report

    term, rim = reversal_error(bh, T, cfg)
    report.rim_residuals.append(rim)
    increases = 0
    prev_norm = None
    for j in range(max_terms):
        tn = plane_h1_seminorm(term)
        report.term_norms.append(tn)
        if prev_norm is not None:
            increases = increases + 1 if tn > prev_norm else 0
            if increases >= 3:
                report.iterations_used = j
                raise NeumannDivergenceError(report)
        prev_norm = tn
        if tn < tol * base:
            report.converged = True
            break
        total += term.values
        report.iterations_used = j + 1
        if j + 1 < max_terms:
            term, rim = contraction_step(term, T, cfg)
            report.rim_residuals.append(rim)
    F_hat = PlaneData(values=total, grid=bh.grid, kind="ramp")
    if compute_residual:
        model = trace_from_plane(F_hat, T, cfg)
        diff = trace_axpy(1.0, model, -1.0, trace_like_closed(h))
        denom = trace_l2_norm(h)
        report.residuals.append(trace_l2_norm(diff) / denom if denom > 0 else 0.0)
    return F_hat, report


def trace_like_closed(h: BoundaryTrace) -> BoundaryTrace:
    """View of a trace with the closed slant mask (t >= z)."""
    if h.closed:
        return h
    return BoundaryTrace(
        values=h.values, t0=h.t0, dt=h.dt, cells=h.cells, grid=h.grid, closed=True
    )


def reconstruct_source(
    h: BoundaryTrace,
    cfg: RunConfig,
    max_terms: int | None = None,
    tol: float | None = None,
) -> tuple[SourcePerturbation, NeumannReport]:
    """Recover the physical perturbation: f_hat = -2 Z F_hat, clipped to the ball."""
    F_hat, report = reconstruct_plane_data(h, cfg, max_terms=max_terms, tol=tol)
    return source_from_plane(F_hat), report


def newton_invert(
    data: BoundaryTrace,
    cfg: RunConfig,
    eta_true: np.ndarray | None = None,
) -> tuple[SpeedModel, NewtonReport]:
    """Frozen-Newton inversion of the nonlinear trace map around eta = 1.

    Every update reuses the linearization at the constant background:
    eta <- clip(eta + step * reconstruct(data - scattered_trace(eta))).
    The step is halved when the data misfit increases; two consecutive
    increases at the minimum step abort the loop.
    """
    ws = workspace(cfg)
    report = NewtonReport()
    eta = np.ones(ws.grid.shape)
    data_norm = trace_l2_norm(data)
    if data_norm == 0.0:
        report.converged = True
        report.misfit_history.append(0.0)
        return SpeedModel(eta=eta, grid=ws.grid, M=cfg.M), report

    support = ws.grid.radius_sq() < (1.0 - cfg.sigma) ** 2
    step = 1.0
    stalls = 0
    best_eta = eta
    best_resid = None
    best_misfit = np.inf
    for _ in range(cfg.newton_outer_max):
        model = scattered_field_trace(
            SpeedModel(eta=eta, grid=ws.grid, M=cfg.M), cfg.T, cfg
        )
        resid = trace_axpy(1.0, data, -1.0, model)
        misfit = trace_l2_norm(resid) / data_norm
        report.misfit_history.append(misfit)
        if eta_true is not None:
            denom = np.linalg.norm(eta_true - 1.0)
            report.eta_error_history.append(
                float(np.linalg.norm(eta - eta_true) / denom) if denom > 0 else 0.0
            )
        if misfit < cfg.newton_outer_tol:
            report.converged = True
            best_eta = eta
            break
        if misfit <= best_misfit:
            best_eta, best_resid, best_misfit = eta, resid, misfit
            stalls = 0
        else:
            if step <= cfg.newton_min_step:
                stalls += 1
                if stalls >= 2:
                    raise NewtonStallError(report)
            step = max(step / 2.0, cfg.newton_min_step)
        # always linearize at the best iterate seen so far
        update, _ = reconstruct_source(
            best_resid, cfg, max_terms=cfg.newton_inner_terms
        )
        eta = best_eta + step * update.values
        eta[~support] = 1.0
        np.clip(eta, 1.0 / cfg.M, cfg.M, out=eta)
        report.step_history.append(step)
    return SpeedModel(eta=best_eta, grid=ws.grid, M=cfg.M), report
