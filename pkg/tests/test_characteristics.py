"""Path tracing, the growth law along paths, and the fixed-point solver.

The logistic closed form is checked against a reference integration written
here from scratch (classical RK4 with steps far below anything the package
uses), so the formula and the package's own integrator cannot share a bug.
"""

import numpy as np
import pytest

from nltraffic import (
    ConfigurationError,
    ConvergenceError,
    Grid1D,
    SolverConfig,
    build_u0,
    logistic_value,
    material_rhs,
    parse_datum,
    solve_local,
    solve_nonlocal,
    solve_picard,
    trace_characteristic,
    trace_many,
)


def integrate_growth_ode(u0, t, epsilon, n_steps=20000):
    """Reference RK4 for du/dt = u (1 - u) / epsilon, independent of the package."""
    h = t / n_steps
    f = lambda u: u * (1.0 - u) / epsilon
    u = u0
    for _ in range(n_steps):
        k1 = f(u)
        k2 = f(u + 0.5 * h * k1)
        k3 = f(u + 0.5 * h * k2)
        k4 = f(u + h * k3)
        u += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return u


# --- closed-form growth law -----------------------------------------------------


def test_logistic_matches_reference_integration():
    for u0 in (0.05, 0.25, 0.5, 0.9):
        for eps in (0.0625, 0.25, 1.0):
            for t in (0.01, 0.2, 1.0):
                assert logistic_value(u0, t, eps) == pytest.approx(
                    integrate_growth_ode(u0, t, eps), abs=1e-10
                )


def test_logistic_frozen_points():
    eps = 0.25
    assert logistic_value(0.5, eps * np.log(2.0), eps) == pytest.approx(2 / 3, abs=1e-15)
    for t in (0.0, 0.5, 3.0):
        assert logistic_value(1.0, t, 0.1) == 1.0
        assert logistic_value(0.0, t, 0.1) == 0.0
    assert logistic_value(0.3, 0.0, 1.0) == pytest.approx(0.3, abs=1e-15)


def test_logistic_monotone_in_time_and_bounded():
    ts = np.linspace(0.0, 3.0, 31)
    for u0 in (0.01, 0.5, 0.99):
        vals = [logistic_value(u0, float(t), 0.2) for t in ts]
        assert all(b >= a for a, b in zip(vals[:-1], vals[1:]))
        assert all(0.0 <= v <= 1.0 for v in vals)


def test_logistic_validates_arguments():
    with pytest.raises(ValueError):
        logistic_value(-0.1, 1.0, 1.0)
    with pytest.raises(ValueError):
        logistic_value(1.1, 1.0, 1.0)
    with pytest.raises(ValueError):
        logistic_value(0.5, -1.0, 1.0)
    with pytest.raises(ValueError):
        logistic_value(0.5, 1.0, 0.0)


def test_material_rhs_values():
    assert material_rhs(0.4, 0.4, 0.1) == 0.0
    assert material_rhs(0.0, 1.0, 0.1) == 0.0
    eps = 0.125
    assert material_rhs(0.5, 1.0, eps) == pytest.approx(1.0 / (4 * eps), abs=0)
    with pytest.raises(ValueError):
        material_rhs(0.5, 1.0, 0.0)


# --- tracing --------------------------------------------------------------------


def _record(datum, eps=2.0**-3, n=320, t_final=0.3, **kw):
    g = Grid1D(-1.5, 1.0, n)
    cfg = SolverConfig(grid=g, epsilon=eps, datum=datum, t_final=t_final, **kw)
    return solve_nonlocal(cfg)


def test_trace_through_constant_field_is_a_straight_line():
    c = 0.25
    rec = _record(np.full(320, c), left_ghost_value=c, right_ghost_value=c,
                  output_times=(0.15,))
    path = trace_characteristic(rec, -0.8)
    np.testing.assert_allclose(
        path.positions, -0.8 + (1 - c) * path.times, rtol=0, atol=1e-12
    )
    np.testing.assert_allclose(path.transported, c, rtol=0, atol=1e-12)
    sampled = path.values[np.isfinite(path.values)]
    np.testing.assert_allclose(sampled, c, rtol=0, atol=1e-12)
    assert path.epsilon == rec.epsilon


def test_trace_through_jam_never_moves():
    rec = _record(np.ones(320))
    path = trace_characteristic(rec, -0.5)
    assert np.all(path.positions == -0.5)
    assert np.all(path.transported == 1.0)


def test_origin_stays_pinned_on_oscillatory_datum():
    rec = _record(build_u0(4))
    path = trace_characteristic(rec, 0.0)
    assert np.max(np.abs(path.positions)) <= 1e-6


def test_paths_near_origin_stay_confined():
    eps = 2.0**-3
    rec = _record(build_u0(4), eps=eps)
    for path in trace_many(rec, np.linspace(-eps, 0.0, 20)):
        assert path.positions.min() >= path.start - 1e-8
        assert path.positions.max() <= 1e-8


def test_ordered_starts_never_cross():
    rec = _record(build_u0(4))
    paths = trace_many(rec, np.linspace(-1.2, -0.01, 20))
    pos = np.array([p.positions for p in paths])
    assert np.diff(pos, axis=0).min() >= -1e-8


def test_transported_value_follows_growth_law_on_plateau():
    # start mid-plateau of the second block, with the lookahead equal to the
    # block's distance scale: the point one lookahead ahead of the path then
    # sits inside the jam for all time and growth is exactly logistic
    eps = 2.0**-4
    rec = _record(build_u0(4), eps=eps, n=2560, t_final=0.25)
    path = trace_characteristic(rec, -0.046875)
    want = logistic_value(0.25, 0.25, eps)
    assert path.transported[-1] == pytest.approx(want, rel=1e-9)


def test_trace_respects_t_end():
    rec = _record(build_u0(3))
    path = trace_characteristic(rec, -0.3, t_end=0.1)
    assert path.times[-1] == pytest.approx(0.1, abs=1e-12)
    assert path.times[0] == 0.0


def test_trace_rejects_bad_inputs():
    rec = _record(build_u0(3))
    with pytest.raises(ConfigurationError):
        trace_characteristic(rec, 7.0)  # outside the domain
    with pytest.raises(ConfigurationError):
        trace_characteristic(rec, -0.3, t_end=1.0)  # beyond stored history
    g = Grid1D(-1.0, 1.0, 64)
    local = solve_local(
        SolverConfig(grid=g, epsilon=g.dx, datum=parse_datum("step", g.dx), t_final=0.1)
    )
    with pytest.raises(ConfigurationError):
        trace_characteristic(local, -0.3)  # no lookahead history stored


# --- fixed-point solver -----------------------------------------------------------


def test_picard_constant_datum_converges_first_try():
    g = Grid1D(-1.0, 1.0, 128)
    cfg = SolverConfig(grid=g, epsilon=0.125, datum=np.full(128, 0.3), t_final=0.2,
                       left_ghost_value=0.3, right_ghost_value=0.3)
    rec = solve_picard(cfg)
    assert rec.info["iterations"] == 1
    assert np.abs(rec.snapshot(0.2).values - 0.3).max() <= 1e-12
    assert rec.info["scheme"] == "picard"


def test_picard_jam_datum_converges_first_try():
    g = Grid1D(-1.0, 1.0, 128)
    cfg = SolverConfig(grid=g, epsilon=0.125, datum=np.ones(128), t_final=0.2)
    rec = solve_picard(cfg)
    assert rec.info["iterations"] == 1
    assert np.abs(rec.snapshot(0.2).values - 1.0).max() <= 1e-12


def test_picard_residuals_contract():
    g = Grid1D(-1.5, 1.0, 320)
    cfg = SolverConfig(grid=g, epsilon=2.0**-3, datum=build_u0(3), t_final=0.1)
    rec = solve_picard(cfg)
    res = rec.info["residuals"]
    assert res[-1] <= 1e-8
    assert res[-1] < res[0]
    assert len(res) == rec.info["iterations"]


def test_picard_tracks_the_marcher():
    g = Grid1D(-1.5, 1.0, 640)
    cfg = SolverConfig(grid=g, epsilon=2.0**-4, datum=build_u0(4), t_final=0.1,
                       output_times=(0.05,))
    fv = solve_nonlocal(cfg)
    pi = solve_picard(cfg)
    for t in (0.05, 0.1):
        gap = np.abs(fv.snapshot(t).values - pi.snapshot(t).values).sum() * g.dx
        assert gap <= 5 * g.dx
    assert sorted(pi.snapshots) == [0.0, 0.05, 0.1]


def test_picard_reports_failure_with_history():
    g = Grid1D(-1.5, 1.0, 320)
    cfg = SolverConfig(grid=g, epsilon=2.0**-3, datum=build_u0(3), t_final=0.1)
    with pytest.raises(ConvergenceError) as err:
        solve_picard(cfg, tol=1e-8, max_iter=2)
    assert len(err.value.residuals) == 2
    with pytest.raises(ConfigurationError):
        solve_picard(cfg, tol=-1.0)
    with pytest.raises(ConfigurationError):
        solve_picard(cfg, max_iter=0)
