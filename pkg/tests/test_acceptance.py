"""Acceptance criteria, one test (and one printed PASS/FAIL line) per criterion.

Tolerances are fixed; a criterion that the scheme cannot meet stays failing.
The full suite runs the convergence ladder up to 20480 cells and six paired
runs at 40960 cells, which takes roughly half an hour on one core.
"""

import math

import numpy as np
import pytest

from nlbottleneck import diagnostics as dg
from nlbottleneck.experiments import run_preset, splitting_distances
from nlbottleneck.model import constraint_gap, constraint_roots
from nlbottleneck.numflux import FluxKind, cfl_constant
from nlbottleneck.presets import get_preset, min_speed_model, rational_speed_model
from nlbottleneck.solver import Grid, run, run_coupled, run_splitting, step

pytestmark = pytest.mark.acceptance

# reference values for the validation ladder (E_rho, E_y)
REFERENCE_LADDER = {
    160: (0.24053, 0.0480643),
    320: (0.15731, 0.015939),
    640: (0.09647, 0.007698),
    1280: (0.06197, 0.003715),
    2560: (0.03226, 0.001777),
    5120: (0.01936, 0.000889),
    10240: (0.01055, 0.000443),
}
REL_TOL_LADDER = 0.30
ORDER_RHO, ORDER_RHO_TOL = 0.76, 0.15
ORDER_Y, ORDER_Y_TOL = 1.1, 0.25
E1_BAND = (1.3e-4, 5.3e-4)
EINF_BAND = (3.9e-3, 1.55e-2)
MU5_REF = (6.190e-5, 9.110e-4)
ENTROPY_TOL = 1e-12
MASS_TOL = 1e-10
PROBES = 10_000
PROBE_H = 1e-8
PROBE_TOL = 1e-13
SPLIT_LIMIT = 1e-3
TRACE_TOL = 0.02
FLUX_TOL = 1e-12

_cache: dict = {}


def cached(key, fn):
    if key not in _cache:
        _cache[key] = fn()
    return _cache[key]


def ladder():
    return cached("ladder", lambda: run_preset("convergence", keep_runs=False).summary)


def sweep():
    return cached("sweep", lambda: run_preset("weight_sweep", keep_runs=False).summary)


def case_run(name, cells=None, **changes):
    key = ("case", name, cells, tuple(sorted(changes.items())))
    p = get_preset(name)
    return cached(key, lambda: run(p.config(cells or p.cells[-1], **changes)))


def within(x, lo, hi):
    return lo <= x <= hi


# --------------------------------------------------------------------------


def test_criterion_1_convergence_orders(criterion_log):
    orders = ladder()["orders"]
    ok_rho = abs(orders["rho"] - ORDER_RHO) <= ORDER_RHO_TOL
    ok_y = abs(orders["y"] - ORDER_Y) <= ORDER_Y_TOL
    criterion_log(1, ok_rho and ok_y,
                  f"fitted order rho {orders['rho']:.3f} (want {ORDER_RHO}+-{ORDER_RHO_TOL}), "
                  f"y {orders['y']:.3f} (want {ORDER_Y}+-{ORDER_Y_TOL})")
    assert ok_rho and ok_y


def test_criterion_2_ladder_magnitudes(criterion_log):
    rows = ladder()["refinement"]
    bad = []
    parts = []
    for row in rows:
        ref_rho, ref_y = REFERENCE_LADDER[row["cells"]]
        q_rho, q_y = row["E_rho"] / ref_rho, row["E_y"] / ref_y
        parts.append(f"{row['cells']}: {q_rho:.2f}/{q_y:.2f}")
        for label, q in (("E_rho", q_rho), ("E_y", q_y)):
            if abs(q - 1.0) > REL_TOL_LADDER:
                bad.append(f"{label}@{row['cells']}")
    ok = not bad and len(rows) == len(REFERENCE_LADDER)
    criterion_log(2, ok, f"ratios to reference E_rho/E_y [{'; '.join(parts)}]"
                  + (f"; outside +-30%: {', '.join(bad)}" if bad else ""))
    assert ok


def test_criterion_3_local_gap(criterion_log):
    row = cached("compare_local", lambda: run_preset("compare_local", keep_runs=False).summary)["model_gap"][0]
    ok1 = within(row["E1"], *E1_BAND)
    ok2 = within(row["Einf"], *EINF_BAND)
    criterion_log(3, ok1 and ok2,
                  f"case3 mu3 J={row['cells']}: E1 {row['E1']:.3e} (want {E1_BAND}), "
                  f"Einf {row['Einf']:.3e} (want {EINF_BAND})")
    assert ok1 and ok2


def test_criterion_4_weight_sweep(criterion_log):
    rows = sweep()["model_gap"]
    e1 = [r["E1"] for r in rows]
    einf = [r["Einf"] for r in rows]
    dec = all(b < a for a, b in zip(e1, e1[1:])) and all(b < a for a, b in zip(einf, einf[1:]))
    mu5 = rows[-1]
    ok5 = (within(mu5["E1"] / MU5_REF[0], 0.5, 2.0) and within(mu5["Einf"] / MU5_REF[1], 0.5, 2.0))
    listing = ", ".join(f"mu{r['k']} {r['E1']:.3e}/{r['Einf']:.3e}" for r in rows)
    criterion_log(4, dec and ok5,
                  f"E1/Einf [{listing}]; strictly decreasing: {dec}; mu5 within x2 of {MU5_REF}: {ok5}")
    assert dec and ok5


def test_criterion_5_discrete_entropy(criterion_log):
    worst = {}
    for name in ("case1", "case2", "case3"):
        tr = run(get_preset(name).config(640, store_states=True))
        worst[name] = dg.discrete_entropy_check(tr, tol=ENTROPY_TOL).worst_margin
    ok = all(m <= ENTROPY_TOL for m in worst.values())
    criterion_log(5, ok, "worst entropy margin " + ", ".join(f"{k} {v:.2e}" for k, v in worst.items())
                  + f" (tol {ENTROPY_TOL})")
    assert ok


def _monotonicity_probes(rng):
    models = (min_speed_model(), rational_speed_model())
    grid = Grid.from_bounds(-0.5, 0.5, 24)
    worst = -math.inf
    for _ in range(PROBES):
        model = models[rng.integers(2)]
        kind = list(FluxKind)[rng.integers(4)]
        s = rng.uniform(0.0, model.Sigma)
        q = rng.uniform(0.0, 0.3) if rng.random() < 0.8 else math.inf
        rho = rng.random(grid.J)
        rho[rng.random(grid.J) < 0.15] = 0.0
        rho[rng.random(grid.J) < 0.15] = 1.0
        dt = 0.5 * grid.dx / cfl_constant(model, kind)
        j = rng.integers(grid.J)
        base = step(rho, grid, model, s, q, dt, kind)
        bumped = rho.copy()
        bumped[j] = min(bumped[j] + PROBE_H, model.R)
        out = step(bumped, grid, model, s, q, dt, kind)
        worst = max(worst, float(np.max(base - out)))
    return worst


def test_criterion_6_stability_properties(criterion_log):
    worst_drop = _monotonicity_probes(np.random.default_rng(20240601))
    ranges, drifts = [], []
    for name in ("validation", "case1", "case2", "case3"):
        tr = case_run(name)
        ranges.append((name, tr.rho_min, tr.rho_max))
        drifts.append((name, abs(tr.mass_drift())))
    tr = run(get_preset("artifact_probe").config())
    ranges.append(("artifact_probe", tr.rho_min, tr.rho_max))
    for row in ladder()["refinement"]:
        for r in row["runs"]:
            ranges.append((r["label"], r["rho_min"], r["rho_max"]))
            drifts.append((r["label"], abs(r["mass_drift"])))
    for row in sweep()["model_gap"]:
        for r in row["runs"]:
            ranges.append((r["label"], r["rho_min"], r["rho_max"]))
    ok_mono = worst_drop <= PROBE_TOL
    ok_range = all(0.0 <= lo and hi <= 1.0 for _, lo, hi in ranges)
    max_drift = max(d for _, d in drifts)
    ok_mass = max_drift <= MASS_TOL
    criterion_log(6, ok_mono and ok_range and ok_mass,
                  f"{PROBES} probes, worst output drop {worst_drop:.2e} (tol {PROBE_TOL}); "
                  f"{len(ranges)} runs within [0, 1]: {ok_range}; max mass drift {max_drift:.2e} (tol {MASS_TOL})")
    assert ok_mono and ok_range and ok_mass


def test_criterion_7_bv_bound(criterion_log):
    results = []
    val = case_run("validation")
    eps = 0.005625
    c_eps = dg.bv_bound_constant(val.config.model, eps, sampled=True)
    rep = dg.bv_bound_check(val, c_eps)
    results.append((f"validation eps={eps} C_eps={c_eps:.2f}", rep))
    for name in ("case1", "case2", "case3"):
        tr = case_run(name)
        eps = constraint_gap(tr.config.model).epsilon
        c_eps = dg.bv_bound_constant(tr.config.model, eps, sampled=True)
        results.append((f"{name} eps={eps:.4g} C_eps={c_eps:.2f}", dg.bv_bound_check(tr, c_eps)))
    ok = all(r.applicable and r.passed for _, r in results)
    criterion_log(7, ok, "; ".join(f"{k}: margin {r.worst_margin:.3f}" for k, r in results))
    assert ok


def test_criterion_8_oslc(criterion_log):
    tr = run(get_preset("case2").config(640, bulk_flux=FluxKind.GODUNOV, store_states=True))
    rep = dg.oslc_check(tr)
    ok = rep.applicable and rep.passed
    criterion_log(8, ok, f"case2 Godunov J=640: bound margins {rep.details.get('bound1_margin', math.nan):.2e} "
                         f"/ {rep.details.get('bound2_margin', math.nan):.2e}")
    assert ok


def test_criterion_9_splitting(criterion_log):
    cfg = get_preset("case1").config(1280)
    rows = splitting_distances(cfg, range(1, 7))
    finals = [r["L1_final"] for r in rows]
    nonincreasing = all(b <= a for a, b in zip(finals, finals[1:]))
    small = finals[-1] < SPLIT_LIMIT
    coupled = run_coupled(cfg)
    same = run_splitting(cfg, cfg.dt)
    bitwise = (np.array_equal(coupled.rho_final, same.rho_final) and np.array_equal(coupled.y, same.y)
               and np.array_equal(coupled.s, same.s))
    ok = nonincreasing and small and bitwise
    criterion_log(9, ok, "L1(T) for m=1..6 [" + ", ".join(f"{d:.2e}" for d in finals) + "]; "
                  f"nonincreasing {nonincreasing}; below {SPLIT_LIMIT} {small}; delta=dt bitwise {bitwise}")
    assert ok


def test_criterion_10_qualitative_structure(criterion_log):
    cfg = get_preset("case1").config(store_states=True)
    tr = run(cfg)
    i0 = cfg.grid.interface_edge
    active = np.flatnonzero(tr.constraint_active)
    saturated = bool(active.size) and bool(
        np.all(np.abs(tr.interface_flux[active] - tr.q[active]) <= FLUX_TOL))
    n = int(active[-1]) if active.size else tr.steps
    check, hat = constraint_roots(cfg.model, float(tr.s[n]), float(tr.q[n]))
    left, right = float(tr.states[n][i0 - 1]), float(tr.states[n][i0])
    traces = abs(left - hat) <= TRACE_TOL and abs(right - check) <= TRACE_TOL
    probe = cached("probe", lambda: run_preset("artifact_probe").summary)
    durations = [r["duration"] for r in probe["artifact"]]
    decreasing = probe["durations_decreasing"]
    ok = saturated and traces and decreasing
    window = (float(tr.t[active[0]]), float(tr.t[active[-1]])) if active.size else (math.nan, math.nan)
    criterion_log(10, ok,
                  f"case1 interface saturated on [{window[0]:.4f}, {window[1]:.4f}] ({active.size} steps); "
                  f"traces ({left:.4f}, {right:.4f}) vs ({hat:.4f}, {check:.4f}); "
                  f"artifact durations mu3..mu5 [" + ", ".join(f"{d:.4f}" for d in durations)
                  + f"] decreasing {decreasing}")
    assert ok
