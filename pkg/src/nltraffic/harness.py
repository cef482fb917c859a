"""Experiment orchestration: named runs, sweeps, demos, and report files.

Everything that touches the filesystem lives here.  Reports are plain CSV
(floats written with ``repr`` so identical configs give byte-identical
files), and every run directory gets a ``manifest.txt`` listing parameters,
the package version, wall time, and a checksum for each written file.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict, replace
import hashlib
import math
import time
from pathlib import Path

import numpy as np

from ._version import __version__
from .errors import ConfigurationError, ConvergenceError, SolverError
from .model import PiecewiseConstant1D, build_bar_u, build_u0, load_piecewise
from .fv import Grid1D, SolverConfig, solve_local, solve_nonlocal
from .characteristics import trace_characteristic, trace_many
from .analysis import (
    BoundReport,
    VerifyReport,
    check_max_principle,
    check_monotonicity,
    check_plateau,
    evaluate_bounds,
    reconstruct_tv_from_characteristics,
    term_threshold_check,
    total_variation,
    tv_lower_bound_dyadic,
)

__all__ = [
    "RunConfig",
    "SweepSpec",
    "MechanismReport",
    "default_truncation",
    "parse_datum",
    "make_grid",
    "build_solver_config",
    "sweep_resolution",
    "run_simulate",
    "run_characteristics",
    "run_sweep",
    "write_bounds",
    "run_mechanism_demo",
    "run_verify",
    "VERIFY_SUITES",
]

DEFAULT_DOMAIN = (-1.5, 1.0)
TV_WINDOW = (-1.25, 0.5)  # sweeps must resolve all variation inside this window


def default_truncation(dx: float) -> int:
    """Smallest datum truncation whose finest block is still wider than a cell,
    plus two sub-cell blocks so that skipped oscillations are represented."""
    return _ceil_half_log(dx) + 2


def _ceil_half_log(dx: float) -> int:
    return max(0, math.ceil(-math.log2(dx) / 2.0 - 1e-9))


def parse_datum(spec: str, dx: float) -> PiecewiseConstant1D:
    """Build a datum from a selector string.

    Accepted forms: ``blowup`` or ``blowup:K`` (oscillatory datum, default
    truncation tied to the grid), ``bar_u:h`` (three-level platoon),
    ``step`` (0 to 1 at the origin), ``riemann:ul,ur`` (general single jump),
    ``file:path`` (serialized profile).
    """
    name, _, arg = spec.partition(":")
    try:
        if name == "blowup":
            K = int(arg) if arg else default_truncation(dx)
            return build_u0(K)
        if name == "bar_u":
            if not arg:
                raise ConfigurationError("bar_u needs a width, e.g. bar_u:0.1")
            return build_bar_u(float(arg))
        if name == "step":
            return PiecewiseConstant1D(
                breakpoints=np.array([0.0]), values=np.array([]),
                left_extension=0.0, right_extension=1.0,
            )
        if name == "riemann":
            ul, ur = (float(v) for v in arg.split(","))
            for v in (ul, ur):
                if not 0.0 <= v <= 1.0:
                    raise ConfigurationError(f"riemann states must lie in [0, 1], got {v}")
            return PiecewiseConstant1D(
                breakpoints=np.array([0.0]), values=np.array([]),
                left_extension=ul, right_extension=ur,
            )
        if name == "file":
            return load_piecewise(arg)
    except (ValueError, OSError) as exc:
        raise ConfigurationError(f"bad datum spec {spec!r}: {exc}") from exc
    raise ConfigurationError(f"unknown datum selector {name!r}")


def make_grid(domain, dx: float) -> Grid1D:
    a, b = (float(v) for v in domain)
    if not (math.isfinite(dx) and dx > 0.0):
        raise ConfigurationError(f"dx must be positive, got {dx}")
    ratio = (b - a) / dx
    n = round(ratio)
    if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, n):
        raise ConfigurationError(
            f"domain [{a}, {b}] is not a whole number of cells of size {dx}"
        )
    return Grid1D(a, b, int(n))


@dataclass(frozen=True)
class RunConfig:
    """Parsed parameters for a single simulate/characteristics run."""

    datum: str = "blowup"
    domain: tuple = DEFAULT_DOMAIN
    dx: float = 4.0 ** -4
    epsilon: float = None
    dyadic_j: int = None
    t_final: float = 0.5
    output_times: tuple = ()
    scheme: str = "upwind"
    cfl: float = 0.9
    local: bool = False
    out: str = None
    w_stride: int = 1

    def resolved_epsilon(self, grid: Grid1D) -> float:
        if self.local:
            return grid.dx  # placeholder; the local marcher ignores it
        if (self.epsilon is None) == (self.dyadic_j is None):
            raise ConfigurationError("give exactly one of epsilon and dyadic-j")
        if self.dyadic_j is not None:
            if self.dyadic_j < 0:
                raise ConfigurationError(f"dyadic-j must be nonnegative, got {self.dyadic_j}")
            return 2.0 ** -self.dyadic_j
        return float(self.epsilon)


def build_solver_config(run: RunConfig) -> SolverConfig:
    grid = make_grid(run.domain, run.dx)
    return SolverConfig(
        grid=grid,
        epsilon=run.resolved_epsilon(grid),
        datum=parse_datum(run.datum, grid.dx),
        t_final=run.t_final,
        cfl=run.cfl,
        scheme=run.scheme,
        output_times=run.output_times,
        w_stride=run.w_stride,
    )


# --- file plumbing -----------------------------------------------------------


def _fmt(v: float) -> str:
    return repr(float(v))


def _write_lines(path: Path, lines) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for line in lines:
            fh.write(line + "\n")
    return path


def _snapshot_lines(grid: Grid1D, values: np.ndarray):
    yield "x,u"
    for x, u in zip(grid.centers, values):
        yield f"{_fmt(x)},{_fmt(u)}"


def _path_lines(path_obj):
    yield "t,x,u"
    for t, x, u in zip(path_obj.times, path_obj.positions, path_obj.transported):
        yield f"{_fmt(t)},{_fmt(x)},{_fmt(u)}"


def _bound_rows_lines(rows):
    yield "tau,epsilon,j,series,count,dyadic,measured_tv,reconstructed_tv"
    for r in rows:
        cells = [
            _fmt(r.tau),
            _fmt(r.epsilon),
            "" if r.j is None else str(r.j),
            _fmt(r.series_bound),
            str(r.count_bound),
            "" if r.dyadic_bound is None else str(r.dyadic_bound),
            "" if r.measured_tv is None else _fmt(r.measured_tv),
            "" if r.reconstructed_tv is None else _fmt(r.reconstructed_tv),
        ]
        yield ",".join(cells)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def _write_manifest(out_dir: Path, params: dict, files, wall_s: float) -> Path:
    lines = [f"tool = nltraffic {__version__}"]
    for key in sorted(params):
        lines.append(f"{key} = {params[key]}")
    lines.append(f"wall_time_s = {wall_s:.3f}")
    lines.append("")
    for f in files:
        lines.append(f"{f.name}  sha256={_sha256(f)}  bytes={f.stat().st_size}")
    return _write_lines(out_dir / "manifest.txt", lines)


def _flat_params(run: RunConfig, extra: dict = None) -> dict:
    params = {}
    for key, val in asdict(run).items():
        if isinstance(val, tuple):
            val = ",".join(str(v) for v in val)
        params[key] = val
    params.update(extra or {})
    return params


# --- run entry points --------------------------------------------------------


def run_simulate(run: RunConfig) -> list:
    """Solve one configuration and write a snapshot CSV per output time."""
    t0 = time.perf_counter()
    cfg = build_solver_config(run)
    record = solve_local(cfg) if run.local else solve_nonlocal(cfg)
    out_dir = Path(run.out or "out")
    files = []
    for t in record.times:
        name = f"u_t{t:g}_eps{record.epsilon:g}.csv"
        files.append(
            _write_lines(out_dir / name, _snapshot_lines(record.grid, record.snapshots[t]))
        )
    extra = {
        "n_cells": cfg.grid.n_cells,
        "lookahead_cells": 0 if run.local else cfg.lookahead_cells,
        "steps": record.info.get("steps"),
    }
    _write_manifest(out_dir, _flat_params(run, extra), files, time.perf_counter() - t0)
    return files


def run_characteristics(run: RunConfig, starts, t_end: float = None) -> list:
    """Solve one configuration, trace paths, and write one CSV per start."""
    if run.local:
        raise ConfigurationError("paths need the lookahead field; local runs have none")
    t0 = time.perf_counter()
    cfg = build_solver_config(run)
    record = solve_nonlocal(cfg)
    paths = trace_many(record, starts, t_end)
    out_dir = Path(run.out or "out")
    files = []
    for p in paths:
        name = f"char_y{p.start:g}_eps{record.epsilon:g}.csv"
        files.append(_write_lines(out_dir / name, _path_lines(p)))
    extra = {"starts": ",".join(str(float(s)) for s in starts), "n_cells": cfg.grid.n_cells}
    _write_manifest(out_dir, _flat_params(run, extra), files, time.perf_counter() - t0)
    return files


@dataclass(frozen=True)
class SweepSpec:
    """Lookahead sweep: one solve per j, analysed at each tau.

    The grid refines with j so that every block entering the analytic bounds
    is resolved: with blocks k_min(j)..k_max(j) selected, dx = 4^-(k_max+1)
    makes the narrowest selected gap exactly one cell wide.
    """

    taus: tuple = (0.2,)
    js: tuple = (2, 3, 4, 5, 6)
    scheme: str = "upwind"
    domain: tuple = DEFAULT_DOMAIN
    cfl: float = 0.9

    def __post_init__(self):
        taus = tuple(sorted(float(t) for t in self.taus))
        if taus and taus[0] < 0.0:
            raise ConfigurationError("tau values must be nonnegative")
        if len(set(taus)) != len(taus):
            raise ConfigurationError("tau values must be distinct")
        js = tuple(int(j) for j in self.js)
        if any(j < 0 for j in js):
            raise ConfigurationError("j values must be nonnegative")
        if len(set(js)) != len(js):
            raise ConfigurationError("j values must be distinct")
        a, b = self.domain
        if a > TV_WINDOW[0] or b < TV_WINDOW[1]:
            raise ConfigurationError(
                f"sweep domain must contain [{TV_WINDOW[0]}, {TV_WINDOW[1]}]"
            )
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "js", tuple(sorted(js)))


def sweep_resolution(j: int):
    """Block range and cell size used for lookahead index j.

    Blocks narrower than the lookahead distance start at k_min = ceil(j/2);
    up to three of them are kept (fewer for small j, where fewer exist), and
    the grid is refined until the last kept gap spans a full cell.  Keeping
    the count bounded keeps the finest sweep grids at ~10^4 cells.
    """
    k_min = (j + 1) // 2
    k_max = k_min + max(0, min(j - 2, 2))
    dx = 2.0 ** (-2 * (k_max + 1))
    return k_min, k_max, dx


def run_sweep(spec: SweepSpec, out: str = None):
    """Run the blow-up trend experiment; returns (rows, failures).

    Each j gets one solve carried to max(tau) with snapshots at every tau;
    each (tau, j) row combines the analytic bounds with the measured grid
    total variation and the characteristic-trace reconstruction.  A failed
    solve marks its rows with NaN measurements and is reported, not raised.
    """
    t0 = time.perf_counter()
    rows = []
    failures = []
    if not spec.taus:
        raise ConfigurationError("sweep needs at least one tau")
    t_final = max(spec.taus)
    if t_final <= 0.0:
        raise ConfigurationError("sweep needs a positive tau to march to")
    for j in spec.js:
        _, _, dx = sweep_resolution(j)
        gridded = [t for t in spec.taus if t > 0.0]
        cfg = SolverConfig(
            grid=make_grid(spec.domain, dx),
            epsilon=2.0 ** -j,
            datum=build_u0(default_truncation(dx)),
            t_final=t_final,
            cfl=spec.cfl,
            scheme=spec.scheme,
            output_times=tuple(gridded),
        )
        record = None
        error = None
        try:
            record = solve_nonlocal(cfg)
        except (SolverError, ConvergenceError) as exc:
            error = f"j={j}: {exc}"
            failures.append(error)
        for tau in spec.taus:
            base = evaluate_bounds(tau, j=j)
            if record is None:
                rows.append(replace(base, measured_tv=math.nan, reconstructed_tv=math.nan))
                continue
            snap = record.snapshot(tau)
            recon = reconstruct_tv_from_characteristics(record, tau)
            rows.append(
                replace(
                    base,
                    measured_tv=total_variation(snap),
                    reconstructed_tv=recon.total,
                )
            )
    rows.sort(key=lambda r: (r.j, r.tau))
    if out is not None:
        out_dir = Path(out)
        csv = _write_lines(out_dir / "sweep.csv", _bound_rows_lines(rows))
        params = {
            "taus": ",".join(str(t) for t in spec.taus),
            "js": ",".join(str(j) for j in spec.js),
            "scheme": spec.scheme,
            "cfl": spec.cfl,
            "domain": f"{spec.domain[0]},{spec.domain[1]}",
            "failures": len(failures),
        }
        _write_manifest(out_dir, params, [csv], time.perf_counter() - t0)
    return rows, failures


def write_bounds(rows, out: str) -> list:
    """Write analytic bound rows as bounds.csv plus a manifest; returns paths."""
    t0 = time.perf_counter()
    out_dir = Path(out)
    csv = _write_lines(out_dir / "bounds.csv", _bound_rows_lines(rows))
    params = {"taus": ",".join(str(r.tau) for r in rows), "rows": len(rows)}
    _write_manifest(out_dir, params, [csv], time.perf_counter() - t0)
    return [csv]


@dataclass(frozen=True)
class MechanismReport:
    """Numbers behind the variation-growth mechanism on the platoon datum."""

    h: float
    epsilon: float
    tau: float
    dx: float
    tv_initial: float
    tv_final: float
    vacuum_max: float
    plateau_max: float
    slope_estimate: float
    slope_expected: float

    @property
    def slope_rel_error(self) -> float:
        return abs(self.slope_estimate - self.slope_expected) / self.slope_expected

    @property
    def ok(self) -> bool:
        return (
            self.tv_final > self.tv_initial
            and self.vacuum_max <= 1e-6
            and self.plateau_max <= 1e-12
            and self.slope_rel_error <= 0.10
        )

    def lines(self):
        yield f"platoon width h={self.h:g}, lookahead epsilon={self.epsilon:g}, horizon tau={self.tau:g}, dx={self.dx:g}"
        yield f"total variation: {self.tv_initial:g} initially -> {self.tv_final:.6g} at tau ({'grew' if self.tv_final > self.tv_initial else 'did not grow'})"
        yield f"vacuum cells stayed below {self.vacuum_max:.3e} (tol 1e-06)"
        yield f"jam side stayed within {self.plateau_max:.3e} of 1"
        yield (
            f"platoon growth rate {self.slope_estimate:.6g} vs 1/(4 epsilon) = "
            f"{self.slope_expected:.6g} ({100 * self.slope_rel_error:.2f}% off)"
        )
        yield "verdict: " + ("PASS" if self.ok else "FAIL")


def run_mechanism_demo(
    h: float = 0.1, epsilon: float = 0.4, tau: float = 0.05, dx: float = None, out: str = None
) -> MechanismReport:
    """Quantify how a half-density platoon steepens against a jam.

    Requires ``epsilon > h`` so the whole platoon sees the jam through the
    lookahead window from the start; that is the regime where the growth
    rate at the platoon value 1/2 equals 1/(4 epsilon).
    """
    if not (math.isfinite(h) and h > 0.0):
        raise ConfigurationError(f"h must be positive, got {h}")
    if not epsilon > h:
        raise ConfigurationError(
            f"the demo needs epsilon > h (platoon inside one lookahead), got "
            f"epsilon={epsilon}, h={h}"
        )
    if not tau > 0.0:
        raise ConfigurationError(f"tau must be positive, got {tau}")
    t0 = time.perf_counter()
    if dx is None:
        m = math.ceil(32.0 * epsilon / h)
    else:
        m = round(epsilon / dx)
        if m < 1 or abs(epsilon / dx - m) > 1e-9 * max(1.0, m):
            raise ConfigurationError(f"epsilon={epsilon} is not a whole number of cells (dx={dx})")
    dx = epsilon / m
    n_left = math.ceil(max(1.0, 4.0 * h) / dx)
    n_right = math.ceil(max(1.0, epsilon + 0.25) / dx)
    grid = Grid1D(-n_left * dx, n_right * dx, n_left + n_right)

    datum = build_bar_u(h)
    t_probe = tau / 5.0
    cfg = SolverConfig(
        grid=grid,
        epsilon=epsilon,
        datum=datum,
        t_final=tau,
        output_times=(t_probe,),
    )
    record = solve_nonlocal(cfg)

    centers = grid.centers
    vacuum_sel = (centers >= -h / 8.0) & (centers < 0.0)
    jam_sel = centers >= 0.0
    vacuum_max = 0.0
    plateau_max = 0.0
    for t in record.times:
        u = record.snapshots[t]
        vacuum_max = max(vacuum_max, float(np.max(np.abs(u[vacuum_sel]))))
        plateau_max = max(plateau_max, float(np.max(np.abs(u[jam_sel] - 1.0))))

    probe = trace_characteristic(record, -0.75 * h, t_end=t_probe)
    slope = (probe.values[-1] - probe.values[0]) / t_probe

    report = MechanismReport(
        h=h,
        epsilon=epsilon,
        tau=tau,
        dx=dx,
        tv_initial=total_variation(datum),
        tv_final=total_variation(record.snapshot(tau)),
        vacuum_max=vacuum_max,
        plateau_max=plateau_max,
        slope_estimate=float(slope),
        slope_expected=1.0 / (4.0 * epsilon),
    )
    if out is not None:
        out_dir = Path(out)
        files = []
        for t in record.times:
            name = f"u_t{t:g}_eps{record.epsilon:g}.csv"
            files.append(_write_lines(out_dir / name, _snapshot_lines(grid, record.snapshots[t])))
        params = {"h": h, "epsilon": epsilon, "tau": tau, "dx": dx, "verdict": report.ok}
        _write_manifest(out_dir, params, files, time.perf_counter() - t0)
    return report


# --- canned verification suites ----------------------------------------------


def _canned_blowup(epsilon: float, dx: float, t_final: float, outputs: tuple) -> SolverConfig:
    grid = make_grid(DEFAULT_DOMAIN, dx)
    return SolverConfig(
        grid=grid,
        epsilon=epsilon,
        datum=build_u0(default_truncation(dx)),
        t_final=t_final,
        output_times=outputs,
    )


def _suite_max_principle():
    record = solve_nonlocal(_canned_blowup(2.0 ** -3, 2.0 ** -8, 0.3, (0.1, 0.2)))
    return [check_max_principle(record, 0.0, 1.0)]


def _suite_monotonicity():
    reports = []
    grid = make_grid(DEFAULT_DOMAIN, 2.0 ** -6)
    for scheme in ("upwind", "lax-friedrichs"):
        cfg = SolverConfig(
            grid=grid,
            epsilon=2.0 ** -3,
            datum=parse_datum("step", grid.dx),
            t_final=0.5,
            scheme=scheme,
            output_times=(0.1, 0.25),
        )
        report = check_monotonicity(solve_nonlocal(cfg))
        reports.append(replace(report, name=f"monotonicity-{scheme}"))
    return reports


def _suite_plateau():
    record = solve_nonlocal(_canned_blowup(2.0 ** -4, 2.0 ** -8, 0.5, (0.25,)))
    return [check_plateau(record, 5e-3)]


def _suite_characteristics():
    record = solve_nonlocal(_canned_blowup(2.0 ** -4, 2.0 ** -8, 0.3, ()))
    eps = record.epsilon
    reports = []

    origin = trace_characteristic(record, 0.0)
    reports.append(
        VerifyReport("origin-pinned", float(np.max(np.abs(origin.positions))), 1e-6)
    )

    ys = np.linspace(-eps, 0.0, 20)
    paths = trace_many(record, ys)
    worst = 0.0
    where = ""
    for p in paths:
        high = float(np.max(p.positions))
        low = float(np.max(p.start - p.positions))
        if max(high, low) > worst:
            worst = max(high, low)
            where = f"start {p.start:g}"
    reports.append(VerifyReport("confinement", worst, 1e-8, where))

    ys = np.linspace(-1.2, -0.01, 20)
    paths = trace_many(record, ys)
    cross = 0.0
    for left, right in zip(paths, paths[1:]):
        cross = max(cross, float(np.max(left.positions - right.positions)))
    reports.append(VerifyReport("non-crossing", cross, 1e-8))
    return reports


def _suite_bounds():
    taus = (0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5)
    worst_chain = 0.0
    where = ""
    for j in range(2, 7):
        for tau in taus:
            report = evaluate_bounds(tau, j=j)
            gap = max(
                report.count_bound - report.series_bound,
                report.dyadic_bound - report.count_bound,
            )
            if gap > worst_chain:
                worst_chain = float(gap)
                where = f"tau={tau}, j={j}"
    reports = [VerifyReport("bound-chain", worst_chain, 0.0, where)]

    reports.append(
        VerifyReport("dyadic-count", float(abs(tv_lower_bound_dyadic(1.0, 4) - 22)), 0.0)
    )

    mismatches = 0
    spot = ""
    for k in range(25):
        for tau in [0.05 * i for i in range(20)]:
            for eps in [0.05 * i for i in range(1, 21)]:
                x = tau / eps
                threshold = x / math.log(2.0) + math.log1p(math.exp(-x)) / math.log(2.0)
                if term_threshold_check(k, tau, eps) != (k <= threshold):
                    mismatches += 1
                    spot = spot or f"k={k}, tau={tau}, eps={eps}"
    reports.append(VerifyReport("threshold-equivalence", float(mismatches), 0.0, spot))
    return reports


VERIFY_SUITES = {
    "max-principle": _suite_max_principle,
    "monotonicity": _suite_monotonicity,
    "plateau": _suite_plateau,
    "characteristics": _suite_characteristics,
    "bounds": _suite_bounds,
}


def run_verify(names=None) -> list:
    """Run named check suites on canned configurations, printing verdicts."""
    if not names:
        names = list(VERIFY_SUITES)
    unknown = [n for n in names if n not in VERIFY_SUITES]
    if unknown:
        raise ConfigurationError(
            f"unknown suite(s) {', '.join(unknown)}; available: {', '.join(VERIFY_SUITES)}"
        )
    reports = []
    for name in names:
        for report in VERIFY_SUITES[name]():
            print(report.summary())
            reports.append(report)
    return reports
