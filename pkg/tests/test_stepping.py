"""Time stepping: CFL formula, scheme order, exact drag-relaxation oracle,
statuses, and conservation over runs."""
import math

import numpy as np
import pytest

from dragflow.dynamics import FluidParams, State
from dragflow.grid import Grid
from dragflow.initial import InitSpec, generate_initial
from dragflow.stepping import Status, TimeConfig, compute_dt, run, step

PARAMS = FluidParams(gamma=2.0, mu=1.0, lam=0.0)


def uniform_state(grid, a, b, rho0=1.0):
    return State(
        grid,
        np.full(grid.shape, rho0),
        np.full((grid.dim,) + grid.shape, rho0 * a),
        grid.zeros(),
        np.full((grid.dim,) + grid.shape, b),
    )


def single_mode_state(grid, amp=0.05, phase_v=0.0):
    spec = InitSpec(
        kind="single_mode",
        amplitudes={"rho": amp, "u": amp, "n": amp, "v": amp},
        phases={"v": phase_v},
    )
    return generate_initial(spec, grid)


def test_time_config_validation():
    with pytest.raises(ValueError):
        TimeConfig(t_end=-1.0)
    with pytest.raises(ValueError):
        TimeConfig(t_end=1.0, cfl_advective=0.0)
    with pytest.raises(ValueError):
        TimeConfig(t_end=1.0, cfl_diffusive=1.5)
    with pytest.raises(ValueError):
        TimeConfig(t_end=1.0, scheme="euler")
    with pytest.raises(ValueError):
        TimeConfig(t_end=1.0, record_every=0)


def test_compute_dt_formula():
    g = Grid(1, 64)
    state = uniform_state(g, 0.0, 0.0)
    cfg = TimeConfig(t_end=1.0, cfl_advective=0.4, cfl_diffusive=0.25, dt_max=1e-2)
    dx = 2 * np.pi / 64
    expected = min(0.4 * dx / np.sqrt(2.0), 0.25 * dx * dx / 2.0, 1e-2)
    assert compute_dt(state, PARAMS, cfg) == pytest.approx(expected, rel=1e-12)


def test_compute_dt_scaling_with_resolution():
    cfg = TimeConfig(t_end=1.0, dt_max=1e6)
    cfg_adv = TimeConfig(t_end=1.0, dt_max=1e6, cfl_diffusive=1.0)
    dts, advs = [], []
    for n in (32, 64):
        g = Grid(1, n)
        state = uniform_state(g, 0.0, 0.0)
        dts.append(compute_dt(state, PARAMS, cfg))
        speed_dominated = TimeConfig(t_end=1.0, dt_max=1e6, cfl_diffusive=1.0)
        advs.append(
            min(
                0.4 * g.dx / np.sqrt(2.0),
                speed_dominated.cfl_diffusive * g.dx**2 / 2.0,
            )
        )
    # diffusive candidate dominates here: quartered when n doubles
    assert dts[0] / dts[1] == pytest.approx(4.0, rel=1e-12)


def test_compute_dt_dt_max_clamp():
    g = Grid(1, 16)
    state = uniform_state(g, 0.0, 0.0)
    cfg = TimeConfig(t_end=1.0, dt_max=1e-6)
    assert compute_dt(state, PARAMS, cfg) == 1e-6


def test_uniform_equilibrium_is_fixed_point():
    g = Grid(1, 32)
    state = uniform_state(g, 0.2, 0.2)
    new, info = step(state, PARAMS, 1e-2)
    assert np.max(np.abs(new.m - state.m)) < 1e-15
    assert np.max(np.abs(new.j - state.j)) < 1e-15
    assert not info.floor_active


def test_drag_ode_step_accuracy():
    # u' = -(u - v), v' = (u - v): (u - v)(t) = (a - b) e^{-2t}
    g = Grid(1, 32)
    state = uniform_state(g, 1.0, 0.0)
    dt = 1e-3
    for _ in range(1000):
        state, _ = step(state, PARAMS, dt)
    u = float(np.mean(state.m / state.rho))
    v = float(np.mean(state.j / (1 + state.n)))
    assert abs((u - v) - math.exp(-2.0)) < 1e-9 * math.exp(-2.0)


@pytest.mark.parametrize("scheme,expected_order", [("rk4", 4), ("ssp_rk3", 3)])
def test_scheme_order_by_richardson(scheme, expected_order):
    # fixed-interval global error ratio ~ 2^order when dt is halved
    g = Grid(1, 32)
    params = FluidParams(gamma=2.0, mu=0.05, lam=0.0)

    def advance(dt, nsteps):
        state = single_mode_state(g, amp=0.1, phase_v=0.7)
        for _ in range(nsteps):
            state, _ = step(state, params, dt, scheme)
        return state

    dt = 2e-2
    ref = advance(dt / 8, 16)
    errs = []
    for scale, nsteps in ((1, 2), (2, 4)):
        got = advance(dt / scale, nsteps)
        errs.append(
            max(
                np.max(np.abs(got.m - ref.m)),
                np.max(np.abs(got.n - ref.n)),
                np.max(np.abs(got.j - ref.j)),
            )
        )
    ratio = errs[0] / errs[1]
    assert ratio > 2 ** (expected_order - 0.5)


def test_step_rejects_absurd_dt():
    g = Grid(1, 32)
    state = single_mode_state(g, amp=0.05)
    from dragflow.stepping import IntegrationError

    with pytest.raises(IntegrationError):
        step(state, PARAMS, 1e6)  # leaves the admissible set within one step


def test_run_zero_horizon():
    g = Grid(1, 32)
    res = run(single_mode_state(g), PARAMS, TimeConfig(t_end=0.0))
    assert res.status == Status.COMPLETED
    assert len(res.records) == 1 and res.records[0].t == 0.0


def test_drag_ode_run_alignment():
    g = Grid(1, 16)
    state = uniform_state(g, 1.0, 0.0)
    cfg = TimeConfig(t_end=3.0, dt_max=1e-3, record_every=500)
    res = run(state, PARAMS, cfg)
    assert res.status == Status.COMPLETED
    u = float(np.mean(res.final_state.m / res.final_state.rho))
    v = float(np.mean(res.final_state.j / (1 + res.final_state.n)))
    assert abs((u - v) - math.exp(-6.0)) < 1e-6


def test_run_mass_momentum_conservation():
    g = Grid(1, 64)
    state = single_mode_state(g, amp=0.05, phase_v=0.5)
    cfg = TimeConfig(t_end=2.0, record_every=100)
    res = run(state, PARAMS, cfg)
    assert res.status == Status.COMPLETED
    mass = np.array([r.averages.rho_c for r in res.records])
    assert np.max(np.abs(mass - mass[0])) / mass[0] < 1e-12
    mean_n = np.array([r.mass_n for r in res.records])
    assert np.max(np.abs(mean_n)) < 1e-14
    mom = np.array([r.mom_total for r in res.records])
    assert np.max(np.abs(mom - mom[0])) < 1e-13
    assert res.reprojection_max < 1e-10
    assert not res.floor_ever_active


def test_energy_monotone_along_run():
    g = Grid(1, 64)
    state = single_mode_state(g, amp=0.05)
    res = run(state, PARAMS, TimeConfig(t_end=2.0, record_every=50))
    e = np.array([r.functionals.E for r in res.records])
    assert np.all(np.diff(e) <= 1e-9 * e[0])


def test_unstable_cfl_stops_with_breach_status():
    g = Grid(1, 64)
    state = single_mode_state(g, amp=0.05)
    cfg = TimeConfig(t_end=2.0, cfl_diffusive=1.0, dt_max=1.0)
    res = run(state, PARAMS, cfg)
    assert res.status in (
        Status.BLOWUP,
        Status.FLUID_VACUUM_BREACH,
        Status.VACUUM_BREACH,
    )
    assert any(f.startswith("stop:") for f in res.records[-1].flags)


def test_gradient_steepening_guard():
    # without drag the dispersed phase steepens toward a shock and the
    # guard stops the run before the fields blow up
    g = Grid(1, 64)
    params = FluidParams(gamma=2.0, mu=1.0, lam=0.0, drag_on=False)
    spec = InitSpec(kind="single_mode", amplitudes={"rho": 0.2, "u": 0.9})
    state = generate_initial(spec, g)
    res = run(state, params, TimeConfig(t_end=3.0, record_every=100))
    assert res.status == Status.GRADIENT_STEEPENING
    assert any(f.startswith("stop:") for f in res.records[-1].flags)


@pytest.mark.parametrize("dim,n,t_end", [(2, 24, 0.5), (3, 8, 0.1)])
def test_multidimensional_run_completes_and_conserves(dim, n, t_end):
    g = Grid(dim, n)
    spec = InitSpec(
        kind="single_mode", amplitudes={"rho": 0.05, "u": 0.05, "n": 0.05, "v": 0.05}
    )
    state = generate_initial(spec, g)
    res = run(state, PARAMS, TimeConfig(t_end=t_end, record_every=20))
    assert res.status == Status.COMPLETED
    mom = np.array([r.mom_total for r in res.records])
    assert np.max(np.abs(mom - mom[0])) < 1e-12
    for rec in res.records:
        for key, val in rec.checks.items():
            if key.endswith("slack"):
                assert val > -1e-12


def test_records_strictly_increasing_and_residuals_present():
    g = Grid(1, 64)
    state = single_mode_state(g, amp=0.05)
    res = run(state, PARAMS, TimeConfig(t_end=1.0, record_every=50))
    times = [r.t for r in res.records]
    assert all(t1 > t0 for t0, t1 in zip(times, times[1:]))
    interior = [r for r in res.records[1:-1]]
    assert interior, "expected interior records"
    for rec in interior:
        assert math.isfinite(rec.residuals["energy_balance"])
    assert math.isnan(res.records[0].residuals["energy_balance"])
    assert math.isnan(res.records[-1].residuals["energy_balance"])
