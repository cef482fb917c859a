"""Characteristic-line machinery on top of stored solver runs.

Three pieces live here.  Path tracing integrates dX/dt = 1 - w(t, X) through
the lookahead-field history a solver run stored, carrying two kinds of values
along each path: direct samples of the solver's snapshots, and the solution
of the growth law along the path (the material derivative of the model,
du/dt = u * (u(x + epsilon) - u) / epsilon).  The closed form of that growth
law for a constant state ahead is the logistic curve, exposed separately.
Finally, a fixed-point solver rebuilds the solution by repeatedly freezing
the lookahead field and transporting the datum along its characteristics,
which gives an independent cross-check on the finite-volume marcher.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .errors import ConfigurationError, ConvergenceError
from .fv import Grid1D, SolutionRecord, SolverConfig, compute_w, _project_datum

__all__ = [
    "CharacteristicPath",
    "logistic_value",
    "material_rhs",
    "trace_characteristic",
    "trace_many",
    "solve_picard",
]


@dataclass(frozen=True, eq=False)
class CharacteristicPath:
    """One traced trajectory X(t) with values carried along it.

    ``values[i]`` is the solver snapshot sampled at ``(times[i],
    positions[i])`` where a snapshot exists and NaN elsewhere; ``transported``
    integrates the material growth law along the path starting from the
    datum, which stays meaningful even after the underlying feature has
    compressed below the grid scale.
    """

    start: float
    epsilon: float
    times: np.ndarray
    positions: np.ndarray
    values: np.ndarray
    transported: np.ndarray

    def __post_init__(self):
        if self.times.shape != self.positions.shape:
            raise ConfigurationError("times and positions must have equal length")
        if self.times[0] != 0.0:
            raise ConfigurationError("paths must start at t = 0")


def logistic_value(u0y: float, t: float, epsilon: float) -> float:
    """Closed-form value along a confined path: u0 / ((1 - u0) e^(-t/eps) + u0).

    This solves du/dt = u (1 - u) / epsilon, the growth law when the road one
    lookahead distance ahead is fully jammed.  Both 0 and 1 are fixed points;
    the value 0 is taken as the continuous extension of the formula.
    """
    if not (0.0 <= u0y <= 1.0):
        raise ValueError(f"u0y must lie in [0, 1], got {u0y}")
    if t < 0.0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if not (math.isfinite(epsilon) and epsilon > 0.0):
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if u0y == 0.0:
        return 0.0
    return u0y / ((1.0 - u0y) * math.exp(-t / epsilon) + u0y)


def material_rhs(u_here, u_ahead, epsilon: float):
    """Growth rate along a path: u * (u_ahead - u) / epsilon.

    ``u_ahead`` is the solution one lookahead distance downstream; a vacuum
    point (u = 0) never grows, a flat stretch does not change.
    """
    if not epsilon > 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    return u_here * (u_ahead - u_here) / epsilon


def _sample_cells(values: np.ndarray, grid: Grid1D, x, left: float, right: float):
    """Piecewise-constant lookup of cell values with ghost extensions."""
    x = np.asarray(x, dtype=float)
    idx = np.floor((x - grid.x_left) / grid.dx).astype(int)
    inner = values[np.clip(idx, 0, grid.n_cells - 1)]
    return np.where(idx < 0, left, np.where(idx >= grid.n_cells, right, inner))


def trace_many(record: SolutionRecord, starts, t_end: float = None) -> list:
    """Trace a batch of characteristics through one record's field history.

    Each stored field interval gets one Runge-Kutta step (fourth order), with
    the field linearly interpolated in space and frozen in time inside the
    interval, matching how the marcher used it.  The growth-law values use
    the jam state ahead as sampled from the latest snapshot at or before the
    interval start.
    """
    if record.w_fields.shape[0] == 0:
        raise ConfigurationError(
            "record has no stored lookahead fields and cannot be traced"
        )
    grid = record.grid
    eps = record.epsilon
    starts = np.asarray(starts, dtype=float).reshape(-1)
    for y in starts:
        if not (grid.x_left <= y <= grid.x_right):
            raise ConfigurationError(
                f"start {y} outside domain [{grid.x_left}, {grid.x_right}]"
            )
    t_max = float(record.w_times[-1])
    if t_end is None:
        t_end = t_max
    if not (0.0 <= t_end <= t_max + 1e-12):
        raise ConfigurationError(f"t_end={t_end} outside the stored range [0, {t_max}]")

    cfg = record.config
    edges = grid.edges
    u0 = record.snapshots[0.0]
    X = starts.copy()
    V = _sample_cells(u0, grid, X, cfg.left_ghost_value, cfg.right_ghost_value)
    out_t = [0.0]
    out_x = [X.copy()]
    out_v = [V.copy()]

    for i in range(record.w_fields.shape[0]):
        t0 = record.w_times[i]
        t1 = min(record.w_times[i + 1], t_end)
        if t0 >= t_end - 1e-15:
            break
        h = t1 - t0
        w_row = record.w_fields[i]
        ahead = record.latest_snapshot_at_or_before(t0).values

        def speed(x):
            return 1.0 - np.interp(x, edges, w_row)

        def growth(x, v):
            a = _sample_cells(
                ahead, grid, x + eps, cfg.left_ghost_value, cfg.right_ghost_value
            )
            return v * (a - v) / eps

        k1x = speed(X)
        k1v = growth(X, V)
        k2x = speed(X + 0.5 * h * k1x)
        k2v = growth(X + 0.5 * h * k1x, V + 0.5 * h * k1v)
        k3x = speed(X + 0.5 * h * k2x)
        k3v = growth(X + 0.5 * h * k2x, V + 0.5 * h * k2v)
        k4x = speed(X + h * k3x)
        k4v = growth(X + h * k3x, V + h * k3v)
        X = X + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        V = V + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        out_t.append(t1)
        out_x.append(X.copy())
        out_v.append(V.copy())

    times = np.asarray(out_t)
    positions = np.asarray(out_x)  # (n_points, n_paths)
    transported = np.asarray(out_v)

    snap_times = np.asarray(record.times)
    sampled = np.full_like(positions, np.nan)
    for r, t in enumerate(times):
        hits = np.flatnonzero(np.abs(snap_times - t) <= 1e-9)
        if hits.size:
            field = record.snapshots[float(snap_times[hits[0]])]
            sampled[r] = _sample_cells(
                field, grid, positions[r], cfg.left_ghost_value, cfg.right_ghost_value
            )

    paths = []
    for c, y in enumerate(starts):
        paths.append(
            CharacteristicPath(
                start=float(y),
                epsilon=eps,
                times=times,
                positions=positions[:, c],
                values=sampled[:, c],
                transported=transported[:, c],
            )
        )
    return paths


def trace_characteristic(record: SolutionRecord, y: float, t_end: float = None) -> CharacteristicPath:
    """Trace a single characteristic; see :func:`trace_many`."""
    return trace_many(record, [y], t_end)[0]


def _resample_markers(E: np.ndarray, v: np.ndarray, grid: Grid1D, left: float, right: float) -> np.ndarray:
    """Cell averages of the transported piecewise-constant representation.

    ``E`` holds the transported cell edges (piece i carries value ``v[i]``),
    with the ``left`` value filling whatever the first edge has vacated and
    the ``right`` value continuing past the last edge.  Goes through the
    cumulative mass function, which is exact for piecewise-constant data.
    """
    E = np.maximum.accumulate(E)  # guard against last-ulp edge inversions
    cum = np.concatenate(([0.0], np.cumsum(v * np.diff(E))))
    x = grid.edges
    out = np.interp(x, E, cum)
    below = x < E[0]
    if np.any(below):
        out[below] = (x[below] - E[0]) * left
    above = x > E[-1]
    if np.any(above):
        out[above] = cum[-1] + (x[above] - E[-1]) * right
    return np.diff(out) / grid.dx


def solve_picard(config: SolverConfig, tol: float = 1e-8, max_iter: int = 50) -> SolutionRecord:
    """Fixed-point construction of the solution, as a cross-check solver.

    Starting from the lookahead field of the datum held constant in time, the
    iteration repeatedly (a) transports the datum along the frozen field's
    characteristics, evolving each cell's value by dv/dt = v * s with s the
    field's one-sided slope at the cell's current position, (b) resamples the
    transported representation to the grid at every node time, and (c)
    recomputes the lookahead field from the resampled solution.  It stops
    when the field changes by at most ``tol`` in the sup norm.

    Raises :class:`ConvergenceError` (carrying the residual history) if
    ``max_iter`` rounds do not reach ``tol``.
    """
    if not tol > 0.0:
        raise ConfigurationError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise ConfigurationError(f"max_iter must be at least 1, got {max_iter}")
    grid = config.grid
    dx = grid.dx
    eps = config.epsilon
    u0 = _project_datum(config.datum, grid)

    n_sub = max(1, math.ceil(config.t_final / (config.cfl * dx)))
    nodes = np.unique(
        np.concatenate(
            (
                np.linspace(0.0, config.t_final, n_sub + 1),
                np.asarray(config.output_times, dtype=float),
            )
        )
    )
    nodes = np.concatenate(([nodes[0]], nodes[1:][np.diff(nodes) > 1e-12]))
    n_int = nodes.size - 1

    w0 = compute_w(u0, eps, dx, config.right_ghost_value)
    w_rows = np.tile(w0, (n_int, 1))

    residuals = []
    u_rows = None
    for _ in range(max_iter):
        u_rows = _transport_on_frozen_field(u0, nodes, w_rows, grid, config)
        new_w = np.empty_like(w_rows)
        for i in range(n_int):
            new_w[i] = compute_w(u_rows[i], eps, dx, config.right_ghost_value)
        res = float(np.max(np.abs(new_w - w_rows)))
        residuals.append(res)
        w_rows = new_w
        if res <= tol:
            break
    else:
        raise ConvergenceError(
            f"fixed-point iteration stalled at residual {residuals[-1]:.3e} "
            f"after {max_iter} rounds (tol {tol:.1e})",
            residuals,
        )

    record = SolutionRecord(config=config, epsilon=eps)
    wanted = sorted(set(config.output_times) | {0.0, config.t_final})
    for t in wanted:
        i = int(np.argmin(np.abs(nodes - t)))
        record.snapshots[t] = u_rows[i].copy()
    record.w_times = nodes.copy()
    record.w_fields = w_rows
    record.info.update(
        scheme="picard", iterations=len(residuals), residuals=list(residuals)
    )
    return record


def _transport_on_frozen_field(
    u0: np.ndarray,
    nodes: np.ndarray,
    w_rows: np.ndarray,
    grid: Grid1D,
    config: SolverConfig,
) -> np.ndarray:
    """Transport the datum through the frozen field, sampled at every node.

    The datum's cell edges move with dX/dt = 1 - w(t, X) and each cell's
    value obeys dv/dt = v * s(t, X_mid), where s is the per-cell slope of the
    piecewise-linear field.  After each node interval the moved representation
    is averaged back onto the grid and the next interval starts fresh from
    cell edges.  For a front moving at constant speed this remap step is
    algebraically the upwind update, so the converged fixed point stays within
    a few cells of the marcher it cross-validates instead of drifting apart
    by each method's own truncation error.
    """
    edges = grid.edges
    dx = grid.dx
    n = grid.n_cells
    E = edges.copy()
    v = u0.copy()
    out = np.empty((nodes.size, n))
    out[0] = u0

    def slope_at(slopes, x):
        idx = np.clip(np.floor((x - grid.x_left) / dx).astype(int), 0, n - 1)
        s = slopes[idx]
        return np.where((x < grid.x_left) | (x >= grid.x_right), 0.0, s)

    for i in range(nodes.size - 1):
        h = nodes[i + 1] - nodes[i]
        w_row = w_rows[i]
        slopes = np.diff(w_row) / dx

        def speed(x):
            return 1.0 - np.interp(x, edges, w_row)

        def value_rate(x_edges, vals):
            mid = 0.5 * (x_edges[:-1] + x_edges[1:])
            return vals * slope_at(slopes, mid)

        k1E = speed(E)
        k1v = value_rate(E, v)
        E2 = E + 0.5 * h * k1E
        v2 = v + 0.5 * h * k1v
        k2E = speed(E2)
        k2v = value_rate(E2, v2)
        E3 = E + 0.5 * h * k2E
        v3 = v + 0.5 * h * k2v
        k3E = speed(E3)
        k3v = value_rate(E3, v3)
        E4 = E + h * k3E
        v4 = v + h * k3v
        k4E = speed(E4)
        k4v = value_rate(E4, v4)
        E = E + h / 6.0 * (k1E + 2.0 * k2E + 2.0 * k3E + k4E)
        v = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        out[i + 1] = _resample_markers(
            E, v, grid, config.left_ghost_value, config.right_ghost_value
        )
        E = edges.copy()
        v = out[i + 1].copy()
    return out
