"""Grid machinery, lookahead averages, and the marching schemes.

Oracles here are brute force on purpose: windowed means by explicit slicing,
the single-jump flux by dense sampling of f on the interval between the two
states.  Scheme properties (range, monotonicity, conservation) are swept over
small deterministic configuration lattices rather than random draws, so a
failure reproduces byte for byte.
"""

import numpy as np
import pytest

from nltraffic import (
    ConfigurationError,
    Grid1D,
    GridFunction,
    SolverConfig,
    SolverError,
    build_bar_u,
    build_u0,
    cell_averages,
    cfl_dt,
    compute_w,
    godunov_flux_local,
    parse_datum,
    solve_local,
    solve_nonlocal,
    step_lax_friedrichs,
    step_upwind,
)


def window_mean_oracle(u, m, right_ghost):
    """Mean of the next m cells after each interface, by explicit slicing."""
    ext = np.concatenate((u, np.full(m, right_ghost)))
    return np.array([ext[i : i + m].mean() for i in range(u.size + 1)])


def godunov_oracle(ul, ur):
    """Exact single-jump flux for f(u) = u(1-u) by dense minimization."""
    f = lambda v: v * (1.0 - v)
    span = np.linspace(min(ul, ur), max(ul, ur), 20001)
    return f(span).min() if ul <= ur else f(span).max()


# --- grid ----------------------------------------------------------------------


def test_grid_geometry():
    g = Grid1D(-1.5, 1.0, 10)
    assert g.dx == 0.25
    np.testing.assert_allclose(g.edges, np.linspace(-1.5, 1.0, 11), atol=0)
    np.testing.assert_allclose(g.centers, g.edges[:-1] + 0.125, atol=0)
    assert g.cell_of(-1.5) == 0
    assert g.cell_of(-1.5 + 0.25) == 1  # edges belong to the right cell
    assert g.cell_of(0.99) == 9
    assert g.cell_of(1.0) == 9  # right endpoint clamps into the last cell


def test_grid_validation():
    with pytest.raises(ConfigurationError):
        Grid1D(1.0, -1.0, 10)
    with pytest.raises(ConfigurationError):
        Grid1D(0.0, 1.0, 0)
    with pytest.raises(ConfigurationError):
        Grid1D(0.0, np.inf, 4)


def test_grid_function_norms():
    g = Grid1D(0.0, 1.0, 4)
    a = GridFunction(g, np.array([1.0, 0.0, 2.0, 1.0]))
    b = GridFunction(g, np.array([0.0, 0.0, 0.0, 0.0]))
    assert a.mass() == 1.0
    assert a.l1_diff(b) == 1.0
    assert a.linf_diff(b) == 2.0


# --- lookahead average ----------------------------------------------------------


@pytest.mark.parametrize("m", [1, 2, 5, 16])
def test_compute_w_matches_slicing_oracle(m):
    g = Grid1D(0.0, 1.0, 32)
    dx = g.dx
    u = (np.arange(32) % 7) / 7.0  # deterministic, non-symmetric profile
    w = compute_w(GridFunction(g, u), m * dx)
    np.testing.assert_allclose(w, window_mean_oracle(u, m, 1.0), rtol=0, atol=1e-15)
    w0 = compute_w(u, m * dx, dx=dx, right_ghost_value=0.0)
    np.testing.assert_allclose(w0, window_mean_oracle(u, m, 0.0), rtol=0, atol=1e-15)


def test_compute_w_constant_is_exact():
    g = Grid1D(-1.0, 1.0, 50)
    u = np.full(50, 0.375)
    w = compute_w(GridFunction(g, u), 5 * g.dx, right_ghost_value=0.375)
    assert np.all(w == 0.375)


def test_compute_w_step_halfway_through_window():
    # jump at -eps/2: the window at x = -eps is half vacuum, half jam
    eps = 0.25
    g = Grid1D(-1.0, 1.0, 128)
    u = np.where(g.centers >= -eps / 2, 1.0, 0.0)
    w = compute_w(GridFunction(g, u), eps)
    i = int(np.flatnonzero(np.isclose(g.edges, -eps))[0])
    assert w[i] == 0.5
    assert w[-1] == 1.0
    assert w[0] == 0.0


def test_compute_w_requires_whole_cell_window():
    g = Grid1D(0.0, 1.0, 10)
    with pytest.raises(ConfigurationError):
        compute_w(GridFunction(g, np.zeros(10)), 0.15)


def test_compute_w_jam_window_is_bit_exact():
    g = Grid1D(-1.0, 1.0, 64)
    u = np.where(g.centers >= 0, 1.0, 0.3)
    w = compute_w(GridFunction(g, u), 4 * g.dx)
    jam = np.flatnonzero(g.edges >= 0.0)
    assert np.all(w[jam] == 1.0)


# --- step size -------------------------------------------------------------------


def test_cfl_dt_caps_at_cfl_dx():
    cap = 0.9 * 0.1
    assert cfl_dt(np.zeros(5), 0.1, 0.9) == cap
    assert cfl_dt(np.full(5, 0.5), 0.1, 0.9) == cap  # speed 1/2 still capped
    assert cfl_dt(np.ones(5), 0.1, 0.9) == cap  # jammed road, floor guards 1/0
    assert cfl_dt(np.full(5, -1.0), 0.1, 0.9) == pytest.approx(cap / 2, rel=1e-15)


# --- single steps ----------------------------------------------------------------


@pytest.mark.parametrize("c", [0.0, 0.25, 1.0])
def test_constant_state_is_stationary_for_both_steppers(c):
    n, dx, dt = 20, 0.05, 0.02
    u = np.full(n, c)
    w = np.full(n + 1, c)
    up = step_upwind(u, w, dt, dx, left_ghost_value=c)
    lf = step_lax_friedrichs(u, w, dt, dx, c, c)
    np.testing.assert_array_equal(up, u)
    np.testing.assert_array_equal(lf, u)


def test_step_upwind_moves_mass_downstream_only():
    n, dx = 16, 0.125
    u = np.zeros(n)
    u[4] = 0.5
    w = compute_w(u, 2 * dx, dx=dx, right_ghost_value=0.0)
    out = step_upwind(u, w, 0.05, dx)
    assert out[3] == 0.0  # nothing flows upstream
    assert out[5] > 0.0
    assert out.sum() == pytest.approx(u.sum(), abs=1e-15)


def test_step_upwind_rejects_cfl_violation():
    u = np.zeros(8)
    w = np.zeros(9)
    with pytest.raises(ConfigurationError):
        step_upwind(u, w, dt=0.2, dx=0.1)


def test_steppers_reject_wrong_interface_count():
    with pytest.raises(ConfigurationError):
        step_upwind(np.zeros(8), np.zeros(8), 0.01, 0.1)
    with pytest.raises(ConfigurationError):
        step_lax_friedrichs(np.zeros(8), np.zeros(10), 0.01, 0.1)


# --- single-jump flux for the sharp-interaction law -------------------------------


def test_godunov_flux_frozen_values():
    assert godunov_flux_local(0.0, 1.0) == 0.0
    assert godunov_flux_local(1.0, 0.0) == 0.25
    for c in (0.0, 0.3, 0.5, 1.0):
        assert godunov_flux_local(c, c) == pytest.approx(c * (1 - c), abs=0)


def test_godunov_flux_matches_dense_oracle():
    states = np.linspace(0.0, 1.0, 11)
    for ul in states:
        for ur in states:
            assert godunov_flux_local(ul, ur) == pytest.approx(
                godunov_oracle(ul, ur), abs=1e-9
            )


def test_godunov_flux_vectorizes():
    ul = np.array([0.0, 1.0, 0.4])
    ur = np.array([1.0, 0.0, 0.4])
    np.testing.assert_allclose(godunov_flux_local(ul, ur), [0.0, 0.25, 0.24], atol=1e-15)


# --- configuration validation ------------------------------------------------------


def test_solver_config_validation():
    g = Grid1D(-1.0, 1.0, 64)
    ok = dict(grid=g, epsilon=4 * g.dx, datum=np.zeros(64), t_final=0.1)
    SolverConfig(**ok)
    with pytest.raises(ConfigurationError):
        SolverConfig(**{**ok, "epsilon": 3.7 * g.dx})
    with pytest.raises(ConfigurationError):
        SolverConfig(**{**ok, "scheme": "weno"})
    with pytest.raises(ConfigurationError):
        SolverConfig(**{**ok, "cfl": 0.0})
    with pytest.raises(ConfigurationError):
        SolverConfig(**{**ok, "cfl": 1.5})
    with pytest.raises(ConfigurationError):
        SolverConfig(**{**ok, "t_final": 0.0})
    with pytest.raises(ConfigurationError):
        SolverConfig(**{**ok, "right_ghost_value": 1.5})
    with pytest.raises(ConfigurationError):
        SolverConfig(**{**ok, "output_times": (0.05, 0.2)})  # beyond t_final
    with pytest.raises(ConfigurationError):
        SolverConfig(**{**ok, "output_times": (0.05, 0.05)})
    with pytest.raises(ConfigurationError):
        SolverConfig(**{**ok, "w_stride": 0})


def test_datum_array_must_match_grid():
    g = Grid1D(-1.0, 1.0, 64)
    with pytest.raises(ConfigurationError):
        solve_nonlocal(
            SolverConfig(grid=g, epsilon=4 * g.dx, datum=np.zeros(32), t_final=0.1)
        )


def test_non_finite_datum_aborts_with_location():
    g = Grid1D(-1.0, 1.0, 64)
    bad = np.zeros(64)
    bad[17] = np.nan
    cfg = SolverConfig(grid=g, epsilon=4 * g.dx, datum=bad, t_final=0.1)
    with pytest.raises(SolverError) as err:
        solve_nonlocal(cfg)
    assert "cell" in str(err.value)


# --- marching properties -------------------------------------------------------------


def _blowup_cfg(scheme, cfl=0.9, eps=2.0**-3, n=160, t_final=0.2):
    g = Grid1D(-1.5, 1.0, n)
    return SolverConfig(
        grid=g,
        epsilon=eps,
        datum=build_u0(4),
        t_final=t_final,
        cfl=cfl,
        scheme=scheme,
        output_times=(t_final / 2,),
    )


@pytest.mark.parametrize("scheme", ["upwind", "lax-friedrichs"])
@pytest.mark.parametrize("cfl", [0.5, 0.9, 1.0])
def test_range_preserved_on_oscillatory_datum(scheme, cfl):
    rec = solve_nonlocal(_blowup_cfg(scheme, cfl=cfl))
    for t in rec.times:
        v = rec.snapshot(t).values
        assert v.min() >= -1e-12
        assert v.max() <= 1.0 + 1e-12


@pytest.mark.parametrize("scheme", ["upwind", "lax-friedrichs"])
@pytest.mark.parametrize("datum_spec", ["step", "riemann:0.2,0.8", "riemann:0.9,0.1"])
def test_monotone_data_stay_monotone(scheme, datum_spec):
    g = Grid1D(-1.0, 1.0, 128)
    datum = parse_datum(datum_spec, g.dx)
    sign = 1.0 if datum(1.0) >= datum(-1.0) else -1.0
    cfg = SolverConfig(
        grid=g,
        epsilon=2.0**-3,
        datum=datum,
        t_final=0.25,
        scheme=scheme,
        left_ghost_value=datum(-2.0),
        right_ghost_value=datum(2.0),
    )
    rec = solve_nonlocal(cfg)
    for t in rec.times:
        diffs = sign * np.diff(rec.snapshot(t).values)
        assert diffs.min() >= -1e-10


@pytest.mark.parametrize("scheme", ["upwind", "lax-friedrichs"])
def test_monotone_data_tv_never_grows(scheme):
    from nltraffic import total_variation

    g = Grid1D(-1.0, 1.0, 128)
    cfg = SolverConfig(
        grid=g,
        epsilon=2.0**-3,
        datum=parse_datum("step", g.dx),
        t_final=0.3,
        scheme=scheme,
        output_times=(0.1, 0.2),
    )
    rec = solve_nonlocal(cfg)
    tvs = [total_variation(rec.snapshot(t)) for t in rec.times]
    assert all(b <= a + 1e-12 for a, b in zip(tvs[:-1], tvs[1:]))


@pytest.mark.parametrize("scheme", ["upwind", "lax-friedrichs"])
def test_interior_bump_conserves_mass(scheme):
    g = Grid1D(-1.0, 1.0, 100)
    u0 = np.where((g.centers > -0.6) & (g.centers < -0.2), 0.8, 0.0)
    cfg = SolverConfig(
        grid=g,
        epsilon=5 * g.dx,
        datum=u0,
        t_final=0.3,
        scheme=scheme,
        left_ghost_value=0.0,
        right_ghost_value=0.0,
    )
    rec = solve_nonlocal(cfg)
    m0 = rec.snapshot(0.0).mass()
    assert abs(rec.snapshot(0.3).mass() - m0) <= 1e-10


def test_jam_side_is_bit_exact_under_upwind():
    rec = solve_nonlocal(_blowup_cfg("upwind"))
    sel = rec.grid.centers >= 0.0
    for t in rec.times:
        assert np.all(rec.snapshot(t).values[sel] == 1.0)


def test_snapshots_land_exactly_on_requested_times():
    g = Grid1D(-1.0, 1.0, 64)
    cfg = SolverConfig(
        grid=g,
        epsilon=4 * g.dx,
        datum=parse_datum("step", g.dx),
        t_final=0.25,
        output_times=(0.1, 0.17),
    )
    rec = solve_nonlocal(cfg)
    assert sorted(rec.snapshots) == [0.0, 0.1, 0.17, 0.25]
    assert rec.info["steps"] == len(rec.w_times) - 1
    assert rec.w_fields.shape == (rec.info["steps"], g.n_cells + 1)


def test_w_history_thinning_keeps_solution_and_covers_run():
    g = Grid1D(-1.0, 1.0, 64)
    base = dict(
        grid=g, epsilon=4 * g.dx, datum=parse_datum("step", g.dx), t_final=0.2
    )
    full = solve_nonlocal(SolverConfig(**base))
    thin = solve_nonlocal(SolverConfig(**base, w_stride=5))
    np.testing.assert_array_equal(
        full.snapshot(0.2).values, thin.snapshot(0.2).values
    )
    assert thin.w_fields.shape[0] < full.w_fields.shape[0]
    assert thin.w_times[0] == 0.0
    assert thin.w_times[-1] == full.w_times[-1]
    assert thin.w_times.size == thin.w_fields.shape[0] + 1


# --- sharp-interaction limit ---------------------------------------------------------


def test_local_solver_keeps_constants_and_marks_record():
    g = Grid1D(-1.0, 1.0, 50)
    cfg = SolverConfig(grid=g, epsilon=g.dx, datum=np.full(50, 0.6), t_final=0.2,
                       left_ghost_value=0.6, right_ghost_value=0.6)
    rec = solve_local(cfg)
    np.testing.assert_array_equal(rec.snapshot(0.2).values, np.full(50, 0.6))
    assert rec.epsilon == 0.0
    assert rec.w_fields.size == 0
    assert rec.info["scheme"] == "godunov-local"


def test_local_riemann_up_jump_is_stationary():
    g = Grid1D(-1.0, 1.0, 256)
    cfg = SolverConfig(
        grid=g, epsilon=g.dx, datum=parse_datum("riemann:0,1", g.dx), t_final=0.5
    )
    rec = solve_local(cfg)
    np.testing.assert_array_equal(
        rec.snapshot(0.5).values, rec.snapshot(0.0).values
    )


def test_local_riemann_down_jump_opens_fan():
    g = Grid1D(-1.0, 1.0, 256)
    cfg = SolverConfig(
        grid=g, epsilon=g.dx, datum=parse_datum("riemann:1,0", g.dx), t_final=0.5
    )
    rec = solve_local(cfg)
    v = rec.snapshot(0.5).values
    assert abs(v[g.cell_of(0.0)] - 0.5) <= 2 * g.dx
    # fan edges move at speeds -1 and +1
    assert v[g.cell_of(-0.75)] == 1.0
    assert v[g.cell_of(0.75)] == 0.0
