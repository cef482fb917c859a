"""Finite-volume marchers for the averaged-lookahead traffic model.

The model is the scalar conservation law

    u_t + (u * (1 - w))_x = 0,
    w(t, x) = mean of u(t, .) over [x, x + epsilon],

solved on a uniform grid with an upwind or a Lax-Friedrichs flux.  Outside
the computational window the density is frozen at ghost values (vacuum on the
left, jam on the right by default), which matches the stock data where the
solution is constant near both ends of the domain.

The sharp-interaction limit (epsilon -> 0, flux u(1-u)) is handled by a
Godunov marcher so the two can be compared on the same grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import ConfigurationError, SolverError
from .model import PiecewiseConstant1D, cell_averages

__all__ = [
    "Grid1D",
    "GridFunction",
    "SolverConfig",
    "SolutionRecord",
    "compute_w",
    "cfl_dt",
    "step_upwind",
    "step_lax_friedrichs",
    "solve_nonlocal",
    "godunov_flux_local",
    "solve_local",
]


@dataclass(frozen=True)
class Grid1D:
    """Uniform cell-centred grid on ``[x_left, x_right]``."""

    x_left: float
    x_right: float
    n_cells: int

    def __post_init__(self):
        if not (math.isfinite(self.x_left) and math.isfinite(self.x_right)):
            raise ConfigurationError("domain endpoints must be finite")
        if not self.x_left < self.x_right:
            raise ConfigurationError(f"empty domain [{self.x_left}, {self.x_right}]")
        if not isinstance(self.n_cells, (int, np.integer)) or self.n_cells < 1:
            raise ConfigurationError(
                f"n_cells must be a positive integer, got {self.n_cells!r}"
            )

    @property
    def dx(self) -> float:
        return (self.x_right - self.x_left) / self.n_cells

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.x_left, self.x_right, self.n_cells + 1)

    @property
    def centers(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[:-1] + e[1:])

    def cell_of(self, x: float) -> int:
        """Index of the cell containing ``x`` (cells are closed left, open right)."""
        if not (self.x_left <= x <= self.x_right):
            raise ConfigurationError(
                f"x={x} outside domain [{self.x_left}, {self.x_right}]"
            )
        i = int(np.floor((x - self.x_left) / self.dx))
        return min(i, self.n_cells - 1)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Cell averages attached to a grid at one instant."""

    grid: Grid1D
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_cells,):
            raise ConfigurationError(
                f"values shape {vals.shape} does not match grid with {self.grid.n_cells} cells"
            )
        if not np.all(np.isfinite(vals)):
            raise ConfigurationError("grid function values must be finite")
        object.__setattr__(self, "values", vals)

    def mass(self) -> float:
        return float(np.sum(self.values) * self.grid.dx)

    def l1_diff(self, other: "GridFunction") -> float:
        if other.grid != self.grid:
            raise ConfigurationError("grid functions live on different grids")
        return float(np.sum(np.abs(self.values - other.values)) * self.grid.dx)

    def linf_diff(self, other: "GridFunction") -> float:
        if other.grid != self.grid:
            raise ConfigurationError("grid functions live on different grids")
        return float(np.max(np.abs(self.values - other.values)))


@dataclass(frozen=True, eq=False)
class SolverConfig:
    """One complete run description for the marchers.

    ``epsilon`` must be a whole number of cells so the lookahead average is a
    plain window sum; anything else would smear the datum's jumps.  ``datum``
    is a piecewise-constant profile (projected to exact cell averages) or a
    ready-made array of cell values.
    """

    grid: Grid1D
    epsilon: float
    datum: object
    t_final: float
    cfl: float = 0.9
    scheme: str = "upwind"
    left_ghost_value: float = 0.0
    right_ghost_value: float = 1.0
    output_times: tuple = ()
    w_stride: int = 1

    def __post_init__(self):
        if self.scheme not in ("upwind", "lax-friedrichs"):
            raise ConfigurationError(f"unknown scheme {self.scheme!r}")
        if not (0.0 < self.cfl <= 1.0):
            raise ConfigurationError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not (math.isfinite(self.epsilon) and self.epsilon > 0.0):
            raise ConfigurationError(f"epsilon must be positive, got {self.epsilon}")
        ratio = self.epsilon / self.grid.dx
        m = round(ratio)
        if m < 1 or abs(ratio - m) > 1e-9 * max(1.0, m):
            raise ConfigurationError(
                f"epsilon={self.epsilon} is not a whole number of cells (dx={self.grid.dx})"
            )
        if not (math.isfinite(self.t_final) and self.t_final > 0.0):
            raise ConfigurationError(f"t_final must be positive, got {self.t_final}")
        for name in ("left_ghost_value", "right_ghost_value"):
            v = getattr(self, name)
            if not (math.isfinite(v) and 0.0 <= v <= 1.0):
                raise ConfigurationError(f"{name} must lie in [0, 1], got {v}")
        times = tuple(float(t) for t in self.output_times)
        if any(t < 0.0 for t in times):
            raise ConfigurationError("output times must be nonnegative")
        if list(times) != sorted(set(times)):
            raise ConfigurationError("output times must be strictly increasing")
        if any(t > self.t_final + 1e-12 for t in times):
            raise ConfigurationError("output times must not exceed t_final")
        if not isinstance(self.w_stride, (int, np.integer)) or self.w_stride < 1:
            raise ConfigurationError(
                f"w_stride must be a positive integer, got {self.w_stride!r}"
            )
        object.__setattr__(self, "output_times", times)

    @property
    def lookahead_cells(self) -> int:
        return round(self.epsilon / self.grid.dx)


@dataclass
class SolutionRecord:
    """Everything a run produces: snapshots plus the lookahead-field history.

    ``w_times`` holds N+1 interval boundaries and ``w_fields`` the N interface
    rows, each valid on ``[w_times[i], w_times[i+1])``; characteristic tracing
    interpolates inside this history.  ``snapshots`` maps times to cell-average
    arrays.  Runs of the sharp-interaction limit leave the history empty and
    set ``epsilon`` to 0.
    """

    config: SolverConfig
    epsilon: float
    snapshots: dict = field(default_factory=dict)
    w_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    w_fields: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    info: dict = field(default_factory=dict)

    @property
    def grid(self) -> Grid1D:
        return self.config.grid

    @property
    def times(self) -> list:
        return sorted(self.snapshots)

    def snapshot(self, t: float, atol: float = 1e-12) -> GridFunction:
        for s in self.snapshots:
            if abs(s - t) <= atol:
                return GridFunction(self.grid, self.snapshots[s], time=s)
        raise KeyError(f"no snapshot at t={t}; stored times: {self.times}")

    def latest_snapshot_at_or_before(self, t: float) -> GridFunction:
        eligible = [s for s in self.snapshots if s <= t + 1e-12]
        if not eligible:
            raise KeyError(f"no snapshot at or before t={t}")
        s = max(eligible)
        return GridFunction(self.grid, self.snapshots[s], time=s)


def compute_w(u, epsilon: float, dx: float = None, right_ghost_value: float = 1.0) -> np.ndarray:
    """Lookahead averages at every cell interface.

    For a field of ``n`` cells this returns ``n + 1`` values; entry ``i`` is
    the mean of the ``M = epsilon/dx`` cells starting at interface ``i``,
    cells beyond the right edge counting as ``right_ghost_value``.  A windowed
    convolution keeps each value an independent M-term sum, so no roundoff
    drags from one end of the grid to the other the way a running cumulative
    sum would.
    """
    if isinstance(u, GridFunction):
        dx = u.grid.dx
        u = u.values
    if dx is None:
        raise ConfigurationError("dx is required when u is a bare array")
    u = np.asarray(u, dtype=float)
    ratio = epsilon / dx
    m = round(ratio)
    if m < 1 or abs(ratio - m) > 1e-9 * max(1.0, m):
        raise ConfigurationError(
            f"epsilon={epsilon} is not a whole number of cells (dx={dx})"
        )
    ext = np.concatenate([u, np.full(m, right_ghost_value)])
    sums = np.convolve(ext, np.ones(m), mode="valid")
    return sums / m


def cfl_dt(w: np.ndarray, dx: float, cfl: float) -> float:
    """Largest stable step for the upwind flux, capped at ``cfl * dx``.

    The transport speed is ``1 - w``, at most 1 for fields in [0, 1], so the
    cap is what binds in practice; the floor guards a jammed road where the
    speed degenerates to 0.
    """
    speed = float(np.max(1.0 - np.asarray(w)))
    return min(cfl * dx / max(speed, 1e-12), cfl * dx)


def step_upwind(
    u: np.ndarray,
    w: np.ndarray,
    dt: float,
    dx: float,
    left_ghost_value: float = 0.0,
) -> np.ndarray:
    """One upwind step: interface flux ``u * (1 - w)`` with u taken from the left.

    The transport speed ``1 - w`` is nonnegative whenever the field stays in
    [0, 1], so the left cell is always the upwind one.
    """
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    if w.shape != (u.size + 1,):
        raise ConfigurationError(f"need {u.size + 1} interface values, got {w.shape}")
    lam = dt / dx
    if lam * float(np.max(1.0 - w)) > 1.0 + 1e-12:
        raise ConfigurationError(f"time step dt={dt} violates the CFL limit")
    u_left = np.concatenate(([left_ghost_value], u))
    flux = u_left * (1.0 - w)
    return u - lam * (flux[1:] - flux[:-1])


def step_lax_friedrichs(
    u: np.ndarray,
    w: np.ndarray,
    dt: float,
    dx: float,
    left_ghost_value: float = 0.0,
    right_ghost_value: float = 1.0,
) -> np.ndarray:
    """One Lax-Friedrichs step with unit-speed numerical viscosity.

    The interface flux averages the two neighbouring cell fluxes
    ``u_j * (1 - w)`` (each cell paired with the lookahead average at its
    right interface) and subtracts half the cell jump, the global bound on
    the wave speed ``|1 - w| <= 1`` taking the place of the classic
    ``dx / dt`` coefficient.  The classic coefficient gives every cell zero
    weight in its own update, and the resulting odd-even mode is pushed out
    of order by the averaging window; with unit viscosity the self weight
    ``1 - dt/dx`` absorbs the window coupling as long as the step satisfies
    ``dt/dx <= 2M/(2M + 1)`` with ``M`` the window width in cells, which
    :func:`solve_nonlocal` enforces.
    """
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    if w.shape != (u.size + 1,):
        raise ConfigurationError(f"need {u.size + 1} interface values, got {w.shape}")
    lam = dt / dx
    u_ext = np.concatenate(([left_ghost_value], u, [right_ghost_value]))
    w_cells = np.concatenate((w, [right_ghost_value]))
    f_ext = u_ext * (1.0 - w_cells)
    flux = 0.5 * (f_ext[:-1] + f_ext[1:]) - 0.5 * np.diff(u_ext)
    return u - lam * (flux[1:] - flux[:-1])


def _project_datum(datum, grid: Grid1D) -> np.ndarray:
    if isinstance(datum, PiecewiseConstant1D):
        return cell_averages(datum, grid.edges)
    vals = np.asarray(datum, dtype=float)
    if vals.shape != (grid.n_cells,):
        raise ConfigurationError(
            f"datum array shape {vals.shape} does not match grid with {grid.n_cells} cells"
        )
    return vals.copy()


def _march_targets(output_times: tuple, t_final: float) -> list:
    targets = sorted(set(output_times) | {t_final})
    return [t for t in targets if t > 0.0]


def solve_nonlocal(config: SolverConfig) -> SolutionRecord:
    """March the lookahead model to ``t_final``, snapshotting on the way.

    Snapshots are taken at ``config.output_times`` and at ``t_final``, hitting
    each time exactly by shortening the step.  The lookahead-field history is
    stored for every step (thinned to every ``w_stride``-th step on request)
    so characteristics can be traced afterwards.
    """
    grid = config.grid
    u = _project_datum(config.datum, grid)
    dx = grid.dx
    m = config.lookahead_cells
    targets = _march_targets(config.output_times, config.t_final)

    record = SolutionRecord(config=config, epsilon=config.epsilon)
    record.snapshots[0.0] = u.copy()
    w_times = [0.0]
    w_fields = []

    # The Lax-Friedrichs update is a convex combination of neighbours only up
    # to lambda = 2M/(2M+1); shrink its step accordingly.
    lxf_factor = 2.0 * m / (2.0 * m + 1.0) if config.scheme == "lax-friedrichs" else 1.0

    t = 0.0
    step = 0
    for target in targets:
        while t < target - 1e-14:
            w = compute_w(u, config.epsilon, dx, config.right_ghost_value)
            dt = min(cfl_dt(w, dx, config.cfl) * lxf_factor, target - t)
            if config.scheme == "upwind":
                u = step_upwind(u, w, dt, dx, config.left_ghost_value)
            else:
                u = step_lax_friedrichs(
                    u, w, dt, dx, config.left_ghost_value, config.right_ghost_value
                )
            if not np.all(np.isfinite(u)):
                bad = int(np.flatnonzero(~np.isfinite(u))[0])
                raise SolverError(
                    f"non-finite value in cell {bad} (x={grid.centers[bad]:.6g}) "
                    f"at t={t + dt:.6g} after {step + 1} steps"
                )
            w_fields.append(w)
            t += dt
            w_times.append(t)
            step += 1
        t = target
        record.snapshots[target] = u.copy()

    record.w_times = np.asarray(w_times)
    record.w_fields = (
        np.asarray(w_fields) if w_fields else np.zeros((0, grid.n_cells + 1))
    )
    record.info.update(scheme=config.scheme, steps=step)
    if config.w_stride > 1 and w_fields:
        keep = np.zeros(len(w_fields), dtype=bool)
        keep[:: config.w_stride] = True
        keep[-1] = True
        kept = np.flatnonzero(keep)
        # Each kept field now stands in until the next kept boundary.
        record.w_fields = record.w_fields[kept]
        record.w_times = np.concatenate((record.w_times[kept], [w_times[-1]]))
    return record


def godunov_flux_local(ul, ur):
    """Godunov flux for the sharp-interaction law ``f(u) = u (1 - u)``.

    The flux is concave with its maximum at 1/2, so the exact single-jump
    flux is ``min(f(ul), f(ur))`` when ``ul <= ur``, and ``f`` at the point of
    ``[ur, ul]`` closest to 1/2 otherwise.
    """
    ul = np.asarray(ul, dtype=float)
    ur = np.asarray(ur, dtype=float)
    f = lambda v: v * (1.0 - v)
    out = np.where(ul <= ur, np.minimum(f(ul), f(ur)), f(np.clip(0.5, ur, ul)))
    if out.ndim == 0:
        return float(out)
    return out


def solve_local(config: SolverConfig) -> SolutionRecord:
    """Godunov marcher for the sharp-interaction limit ``u_t + (u(1-u))_x = 0``.

    ``config.epsilon`` is ignored (pass ``grid.dx`` to satisfy validation);
    the returned record carries ``epsilon = 0`` and no lookahead history,
    which is what marks it as untraceable.
    """
    grid = config.grid
    u = _project_datum(config.datum, grid)
    dx = grid.dx
    targets = _march_targets(config.output_times, config.t_final)

    record = SolutionRecord(config=config, epsilon=0.0)
    record.snapshots[0.0] = u.copy()

    t = 0.0
    step = 0
    dt_max = config.cfl * dx  # |f'(u)| = |1 - 2u| <= 1 on [0, 1]
    for target in targets:
        while t < target - 1e-14:
            dt = min(dt_max, target - t)
            u_ext = np.concatenate(
                ([config.left_ghost_value], u, [config.right_ghost_value])
            )
            flux = godunov_flux_local(u_ext[:-1], u_ext[1:])
            u = u - dt / dx * (flux[1:] - flux[:-1])
            if not np.all(np.isfinite(u)):
                bad = int(np.flatnonzero(~np.isfinite(u))[0])
                raise SolverError(
                    f"non-finite value in cell {bad} (x={grid.centers[bad]:.6g}) "
                    f"at t={t + dt:.6g} after {step + 1} steps"
                )
            t += dt
            step += 1
        t = target
        record.snapshots[target] = u.copy()

    record.info.update(scheme="godunov-local", steps=step)
    return record
