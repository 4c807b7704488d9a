import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlbottleneck.model import (
    DomainError,
    FluxModel,
    MinSpeed,
    NoConstraint,
    PiecewiseConstantProfile,
    QuadraticFlux,
    TabulatedFlux,
    WeightProfile,
    discretize_weight,
)
from nlbottleneck.numflux import FluxKind, cfl_constant, interface_flux, numerical_flux
from nlbottleneck.presets import min_speed_model, rational_speed_model
from nlbottleneck.solver import (
    CFLViolation,
    ConfigError,
    Grid,
    RunConfig,
    _Stepper,
    run,
    run_coupled,
    run_frozen,
    run_local,
    run_splitting,
    speed_update,
    step,
)

MODEL = min_speed_model()
GRID = Grid.from_bounds(-1.0, 1.0, 200)


def constant(c):
    return PiecewiseConstantProfile((0.0,), (c, c))


def make_config(initial, model=MODEL, grid=GRID, T=0.3, **kw):
    return RunConfig(grid=grid, model=model, weight=WeightProfile.mu(3), initial=initial,
                     y0=0.0, T=T, **kw)


def reference_step(rho, grid, model, s, q, dt, bulk, iface):
    """Straightforward conservative update built from the checked flux functions."""
    ext = np.concatenate([[rho[0]], rho, [rho[-1]]])
    G = numerical_flux(bulk, model, s, ext[:-1], ext[1:])
    i0 = grid.interface_edge
    G[i0] = interface_flux(iface, model, s, q, rho[i0 - 1], rho[i0])
    return rho - dt / grid.dx * (G[1:] - G[:-1])


# --------------------------------------------------------------------------
# speed update
# --------------------------------------------------------------------------


def test_speed_update_examples():
    mu = discretize_weight(WeightProfile.mu(3), GRID.edges)
    s, q, xi = speed_update(np.full(GRID.J, 0.5), MODEL, mu, GRID.dx)
    assert (xi, s) == pytest.approx((0.5, 0.3), abs=1e-14)
    assert q == pytest.approx(0.6 * 0.1225, abs=1e-15)
    s, q, xi = speed_update(np.full(GRID.J, 1.0), MODEL, mu, GRID.dx)
    assert s == pytest.approx(0.0, abs=1e-14)
    assert q == pytest.approx(0.15, abs=1e-14)
    rational = rational_speed_model()
    s, _, xi = speed_update(np.zeros(GRID.J), rational, mu, GRID.dx)
    assert xi == 0.0
    assert s == pytest.approx(0.7, abs=1e-14)


# --------------------------------------------------------------------------
# single step
# --------------------------------------------------------------------------


@pytest.mark.parametrize("kind", list(FluxKind))
def test_step_fixed_points(kind):
    dt = 0.5 * GRID.dx / cfl_constant(MODEL, kind)
    for c in (0.0, 1.0):
        out = step(np.full(GRID.J, c), GRID, MODEL, 0.2, 0.05, dt, kind)
        assert np.array_equal(out, np.full(GRID.J, c))


@pytest.mark.parametrize("kind", list(FluxKind))
def test_fast_kernel_matches_reference(kind):
    rng = np.random.default_rng(11)
    rho = rng.random(GRID.J)
    rho[:10] = 0.0
    rho[-10:] = 1.0
    dt = 0.5 * GRID.dx / cfl_constant(MODEL, kind)
    for s, q in ((0.0, np.inf), (0.13, 0.05), (0.3, 0.0)):
        got = step(rho, GRID, MODEL, s, q, dt, kind)
        want = reference_step(rho, GRID, MODEL, s, q, dt, kind, FluxKind.GODUNOV)
        assert np.max(np.abs(got - want)) <= 1e-15


def test_generic_path_matches_fast_path():
    """A tabulated flux equal to the quadratic one at the nodes takes the numpy path."""
    nodes = np.linspace(0, 1, 3)
    tab = FluxModel(TabulatedFlux(tuple(nodes), (0.0, 0.25, 0.0)), MinSpeed(0.3), NoConstraint())
    rng = np.random.default_rng(5)
    rho = rng.random(GRID.J)
    dt = 0.5 * GRID.dx / cfl_constant(tab)
    out = step(rho, GRID, tab, 0.1, 0.02, dt, FluxKind.RUSANOV)
    want = reference_step(rho, GRID, tab, 0.1, 0.02, dt, FluxKind.RUSANOV, FluxKind.GODUNOV)
    assert np.max(np.abs(out - want)) <= 1e-15


def test_step_refuses_cfl_violation():
    dt = 1.01 * GRID.dx / cfl_constant(MODEL)
    with pytest.raises(CFLViolation):
        step(np.zeros(GRID.J), GRID, MODEL, 0.0, np.inf, dt, FluxKind.RUSANOV)
    with pytest.raises(CFLViolation):
        step(np.zeros(GRID.J), GRID, MODEL, 0.0, np.inf, 0.6 * GRID.dx / cfl_constant(MODEL),
             FluxKind.RUSANOV_LOCAL)


def test_riemann_front_speed():
    """0.4 | 0.5 moves at (f(0.5) - f(0.4)) / 0.1 = 0.1 in the road frame (s = 0)."""
    free = FluxModel(QuadraticFlux(), MinSpeed(0.3), NoConstraint())
    grid = Grid.from_bounds(-2.0, 2.0, 1600)
    cfg = RunConfig(grid=grid, model=free, weight=WeightProfile.mu(3),
                    initial=PiecewiseConstantProfile.riemann(0.4, 0.5, 0.5), y0=0.0, T=4.0,
                    coupling="frozen", frozen=(0.0, np.inf), bulk_flux=FluxKind.RUSANOV)
    tr = run(cfg)
    # front position from the mass to the right of the initial jump
    x = grid.edges
    excess = (tr.rho_final - 0.4) * grid.dx
    front = x[-1] - excess.sum() / 0.1
    assert front - 0.5 == pytest.approx(0.4, abs=4 * grid.dx)


@settings(max_examples=300)
@given(st.integers(0, 2**32 - 1), st.integers(0, 39), st.sampled_from(list(FluxKind)),
       st.floats(0.0, 0.3), st.floats(0.0, 0.25))
def test_monotone_single_step(seed, j, kind, s, q):
    grid = Grid.from_bounds(-0.5, 0.5, 40)
    rho = np.random.default_rng(seed).random(grid.J)
    dt = 0.5 * grid.dx / cfl_constant(MODEL, kind)
    base = step(rho, grid, MODEL, s, q, dt, kind)
    bumped = rho.copy()
    bumped[j] = min(bumped[j] + 1e-8, 1.0)
    out = step(bumped, grid, MODEL, s, q, dt, kind)
    assert np.all(out >= base - 1e-13)


# --------------------------------------------------------------------------
# whole runs
# --------------------------------------------------------------------------


def test_free_road_constant_speed():
    tr = run_coupled(make_config(constant(0.0), model=rational_speed_model()))
    assert tr.y[-1] == pytest.approx(0.7 * tr.config.T, abs=1e-14)
    assert np.all(tr.rho_final == 0.0)


def test_jammed_road_vehicle_stays():
    tr = run_coupled(make_config(constant(1.0)))
    assert tr.y[-1] == 0.0
    assert np.all(tr.rho_final == 1.0)


def test_local_equals_nonlocal_on_constant_data():
    for c in (0.0, 0.55, 0.85):
        cfg = make_config(constant(c))
        a, b = run_coupled(cfg), run_local(cfg)
        assert np.array_equal(a.s, b.s)
        assert np.array_equal(a.rho_final, b.rho_final)


def test_frozen_without_constraint_keeps_constants():
    tr = run_frozen(make_config(constant(0.3)), [0.0] * 1000, [np.inf] * 1000)
    assert np.all(tr.rho_final == 0.3)


def test_frozen_saturated_interface_traces():
    cfg = make_config(constant(0.5), grid=Grid.from_bounds(-1.0, 1.0, 800), T=0.5,
                      coupling="frozen", frozen=(0.0, 0.1875))
    tr = run(cfg)
    i0 = cfg.grid.interface_edge
    assert tr.rho_final[i0 - 1] == pytest.approx(0.75, abs=0.02)
    assert tr.rho_final[i0] == pytest.approx(0.25, abs=0.02)
    assert np.all(tr.constraint_active[:-1])
    assert np.all(tr.interface_flux[:-1] == 0.1875)


def test_frozen_replay_is_bitwise(small_case):
    cfg = small_case("case2", 200)
    a = run_coupled(cfg)
    b = run_frozen(cfg, a.s[:-1], a.q[:-1])
    assert np.array_equal(a.rho_final, b.rho_final)
    assert np.array_equal(a.interface_flux[:-1], b.interface_flux[:-1])


def test_frozen_series_too_short(small_case):
    with pytest.raises(ConfigError):
        run_frozen(small_case(), [0.1], [0.1])


def test_splitting_at_step_scale_is_bitwise(small_case):
    cfg = small_case("case3", 200)
    a = run_coupled(cfg)
    b = run_splitting(cfg, cfg.dt)
    assert np.array_equal(a.rho_final, b.rho_final)
    assert np.array_equal(a.y, b.y)


def test_splitting_single_window(small_case):
    cfg = small_case("case3", 200)
    tr = run_splitting(cfg, cfg.T)
    assert np.all(tr.s[:-1] == tr.s[0])
    with pytest.raises(ConfigError):
        run_splitting(cfg, 0.5 * cfg.dt)


@pytest.mark.parametrize("name", ["case1", "case2", "case3"])
def test_run_invariants(small_case, name):
    tr = run_coupled(small_case(name, 320))
    cfg = tr.config
    assert 0.0 <= tr.rho_min and tr.rho_max <= 1.0
    assert np.all(tr.s >= 0) and np.all(tr.s <= cfg.model.Sigma)
    dy, dt = np.diff(tr.y), np.diff(tr.t)
    assert np.all(dy >= 0) and np.all(dy <= cfg.model.Sigma * dt * (1 + 1e-12))
    assert abs(tr.mass_drift()) <= 1e-12 * tr.steps
    assert tr.boundary_activity < 1e-12


def test_snapshots_at_first_step_after_request(small_case):
    cfg = small_case("case1", 160)
    tr = run_coupled(cfg)
    for t_req, (t_act, rho) in tr.snapshots.items():
        k = int(np.searchsorted(tr.t, t_req - 1e-12))
        assert t_act == tr.t[k]
        assert t_act >= t_req - 1e-12
    assert tr.snapshots[cfg.T][0] == cfg.T
    assert np.array_equal(tr.snapshots[cfg.T][1], tr.rho_final)


def test_time_levels_land_on_T(small_case):
    cfg = small_case()
    t = cfg.time_levels()
    assert t[-1] == cfg.T
    assert np.allclose(np.diff(t)[:-1], cfg.dt, rtol=1e-12, atol=0)
    assert 0 < t[-1] - t[-2] <= cfg.dt


def test_config_validation(small_case):
    cfg = small_case()
    with pytest.raises(ConfigError):
        cfg.with_(cfl_target=1.5)
    with pytest.raises(ConfigError):
        cfg.with_(cfl_target=0.8)  # local Rusanov is limited to 1/2
    with pytest.raises(ConfigError):
        cfg.with_(coupling="splitting")
    with pytest.raises(DomainError):
        cfg.with_(initial=constant(1.2))


def test_domain_without_weight_support():
    tiny = Grid.from_bounds(-0.1, 0.05, 30)
    with pytest.raises(DomainError):
        run_coupled(make_config(constant(0.2), grid=tiny))


def test_stepper_reports_boundary_fluxes():
    rho = np.linspace(0.1, 0.9, GRID.J)
    st_ = _Stepper(GRID, MODEL, FluxKind.RUSANOV, FluxKind.GODUNOV)
    out = np.empty_like(rho)
    gl, gr, _ = st_(rho, out, 0.1, 0.0, 0.2)
    assert gl == pytest.approx(MODEL.F(0.0, 0.1))
    assert gr == pytest.approx(MODEL.F(0.0, 0.9))
