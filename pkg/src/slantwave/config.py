"""Run configuration and derived solver workspace.

RunConfig collects every tunable of the pipeline (grid, final time, CFL,
mollifier and smoothing widths, series and Newton controls, solver
tolerances).  Workspace derives the shared discrete objects from it once:
the domain grid holding the unit ball, the staircase boundary, the global
time grid, and the enclosing solver boxes for free-space marches.

Box sizing: forward solves that only feed the boundary trace use a box of
half-width (T+3)/2 + margin; a wave leaving the ball after t = -1 and
reflecting off the box face cannot return to the ball boundary before
t = 2(L-1) - 1, so the trace stays reflection-free up to T.  Full-field
experiments (the energy identity) use the conservative half-width T + 2.
In 3D a fixed small box with a sponge layer is used instead, for memory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from functools import lru_cache

import numpy as np

from .grid import (
    GridSpec,
    ball_mask,
    boundary_cells,
    build_grid,
    interior_mask,
    solver_box,
)
from .wave import MollifiedImpulse, SpongeProfile, cfl_time_step, mollified_impulse


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # geometry / time
    n: int = 2
    nx: int = 161
    L: float = 1.25
    T: float = 4.0
    cfl: float = 0.9
    c_headroom: float = 1.0  # CFL reserve for sound speeds below 1
    # mollifier / time-reversal smoothing
    eps_cells: int = 4
    k_order: int = 2
    eps_smooth_steps: int = 4
    # progressive expansion
    pwe_order: int = 2
    # Neumann series
    series_max_terms: int = 20
    series_tol: float = 1e-3
    # Newton loop
    newton_outer_max: int = 8
    newton_outer_tol: float = 1e-3
    newton_inner_terms: int = 8
    newton_min_step: float = 0.125
    # harmonic extension
    harmonic_tol: float = 1e-12
    harmonic_max_iter: int = 20000
    # medium bounds
    sigma: float = 0.2
    M: float = 4.0
    # 3D absorbing layer and box
    sponge_width: int = 16
    sponge_strength: float = 60.0
    sponge_ramp: int = 3
    box3_half: float = 2.25
    # trace box margin beyond the causality bound (T+3)/2
    trace_box_margin: float = 0.5
    # bookkeeping
    seed: int = 0
    outdir: str = "out"

    def validated(self) -> "RunConfig":
        if self.n not in (2, 3):
            raise ConfigError(f"n must be 2 or 3, got {self.n}")
        if self.nx < 17 or self.nx % 2 == 0:
            raise ConfigError("nx must be an odd integer >= 17")
        if self.T <= 1.0:
            raise ConfigError("final time T must exceed 1")
        if not 0.0 < self.cfl <= 1.0:
            raise ConfigError("cfl must lie in (0, 1]")
        if self.c_headroom < 1.0:
            raise ConfigError("c_headroom must be >= 1")
        if self.eps_cells < 2:
            raise ConfigError("mollifier width must be at least 2 cells")
        if not 0.0 < self.sigma < 1.0:
            raise ConfigError("sigma must lie in (0, 1)")
        if self.M <= 1.0:
            raise ConfigError("M must exceed 1")
        if self.series_tol <= 0 or self.series_max_terms < 1:
            raise ConfigError("invalid Neumann series controls")
        if self.k_order < 1 or self.k_order > 4:
            raise ConfigError("extension order must be in 1..4")
        return self


_INT_FIELDS = {
    f.name for f in fields(RunConfig) if f.type in ("int",)
}
_STR_FIELDS = {f.name for f in fields(RunConfig) if f.type in ("str",)}


def config_from_items(items: dict[str, str], base: RunConfig | None = None) -> RunConfig:
    """Build a RunConfig from key=value strings (config file / --set)."""
    cfg = base or RunConfig()
    known = {f.name for f in fields(RunConfig)}
    updates = {}
    for key, raw in items.items():
        if key not in known:
            raise ConfigError(f"unknown configuration key '{key}'")
        if key in _STR_FIELDS:
            updates[key] = raw
        elif key in _INT_FIELDS:
            updates[key] = int(raw)
        else:
            updates[key] = float(raw)
    return replace(cfg, **updates).validated()


def parse_config_file(path: str) -> dict[str, str]:
    items: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, val = line.split("=", 1)
            items[key.strip()] = val.strip()
    return items


class Workspace:
    """Discrete objects shared by one pipeline configuration."""

    def __init__(self, cfg: RunConfig):
        cfg.validated()
        self.cfg = cfg
        self.grid: GridSpec = build_grid(cfg.n, cfg.nx, cfg.L)
        self.h = self.grid.h
        self.mask = ball_mask(self.grid, 1.0)
        self.cells = boundary_cells(self.mask)
        self.interior = interior_mask(self.mask, self.cells)
        self.eps = cfg.eps_cells * self.h

        c_max_design = cfg.c_headroom
        dt_raw = cfl_time_step(self.h, cfg.n, c_max_design, cfg.cfl)
        self.t0 = -1.0 - self.eps
        span = cfg.T - self.t0
        self.steps = int(math.ceil(span / dt_raw - 1e-12))
        self.dt = span / self.steps
        self.nt = self.steps + 1
        self.impulse: MollifiedImpulse = mollified_impulse(self.eps, self.dt)
        self.eps_smooth = cfg.eps_smooth_steps * self.dt

        if cfg.n == 2:
            l_trace = (cfg.T + 3.0) / 2.0 + cfg.trace_box_margin
            self.trace_box, self.trace_off = solver_box(self.grid, l_trace)
            self.full_box, self.full_off = solver_box(self.grid, cfg.T + 2.0)
            self.sponge_profile = None
        else:
            self.trace_box, self.trace_off = solver_box(self.grid, cfg.box3_half)
            self.full_box, self.full_off = self.trace_box, self.trace_off
            self.sponge_profile = SpongeProfile(
                width_cells=cfg.sponge_width,
                strength=cfg.sponge_strength,
                ramp=cfg.sponge_ramp,
            )
        self._sponge_cache: dict[int, np.ndarray] = {}

    def sponge_factors(self, box: GridSpec) -> np.ndarray | None:
        if self.sponge_profile is None:
            return None
        key = box.nx
        if key not in self._sponge_cache:
            self._sponge_cache[key] = self.sponge_profile.damp_factors(box, self.dt)
        return self._sponge_cache[key]

    def embed(self, values: np.ndarray, box: GridSpec, off: int) -> np.ndarray:
        out = box.zeros()
        sl = tuple(slice(off, off + self.grid.nx) for _ in range(self.grid.n))
        out[sl] = values
        return out

    def domain_view(self, off: int) -> tuple:
        return tuple(slice(off, off + self.grid.nx) for _ in range(self.grid.n))

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.nt)


@lru_cache(maxsize=8)
def _workspace_cached(cfg: RunConfig) -> Workspace:
    return Workspace(cfg)


def workspace(cfg: RunConfig) -> Workspace:
    return _workspace_cached(cfg)
