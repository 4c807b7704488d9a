"""Preset execution: runs, paired comparisons and their summaries."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics as dg
from .model import WeightProfile
from .presets import ExperimentPreset, get_preset
from .solver import Marcher, RunConfig, Trajectory, run

# runs with at most this many stored doubles keep full states for the entropy/OSLC checks
STATE_BUDGET = 20_000_000


@dataclass
class ResultBundle:
    name: str
    configs: list[RunConfig]
    runs: list[Trajectory] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)


def _steps(cfg: RunConfig) -> int:
    return len(cfg.time_levels()) - 1


def with_affordable_states(cfg: RunConfig) -> RunConfig:
    if cfg.grid.J * (_steps(cfg) + 1) <= STATE_BUDGET:
        return cfg.with_(store_states=True)
    return cfg


def run_summary(tr: Trajectory) -> dict:
    cfg = tr.config
    return {
        "label": cfg.label,
        "cells": cfg.grid.J,
        "dx": cfg.grid.dx,
        "dt": cfg.dt,
        "steps": tr.steps,
        "y_final": float(tr.y[-1]),
        "s_min": float(tr.s.min()),
        "s_max": float(tr.s.max()),
        "constraint_active_fraction": float(tr.constraint_active[:-1].mean()) if tr.steps else 0.0,
        "rho_min": tr.rho_min,
        "rho_max": tr.rho_max,
        "mass_drift": tr.mass_drift(),
        "boundary_inflow": tr.boundary_inflow,
        "boundary_outflow": tr.boundary_outflow,
        "boundary_activity": tr.boundary_activity,
    }


def _diagnose(tr: Trajectory) -> list[dict]:
    return [r.to_dict() for r in dg.standard_reports(tr)]


# --------------------------------------------------------------------------
# tasks (module-level so that they pickle for worker processes)
# --------------------------------------------------------------------------


def _task_single(cfg: RunConfig):
    tr = run(with_affordable_states(cfg))
    out = {"run": run_summary(tr), "diagnostics": _diagnose(tr)}
    tr.states = None
    return out, tr


def _task_pair(cfg_a: RunConfig, cfg_b: RunConfig):
    pr = dg.paired_distance(cfg_a, cfg_b)
    out = {
        "E_rho": pr.e_rho,
        "E_y": pr.e_y,
        "runs": [run_summary(pr.a), run_summary(pr.b)],
    }
    return out, (pr.a, pr.b)


def _task_probe(cfg: RunConfig, s_thr: float, jam_thr: float):
    return artifact_duration(cfg, s_thr, jam_thr), None


def _map(tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(*args) for fn, args in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(fn, *args) for fn, args in tasks]
        return [f.result() for f in futures]


# --------------------------------------------------------------------------
# artifact probe
# --------------------------------------------------------------------------


def artifact_duration(cfg: RunConfig, speed_threshold: float = 1e-3, jam_threshold: float = 1e-3) -> dict:
    """Time during which the vehicle moves while the cell just ahead is still jammed."""
    m = Marcher(cfg)
    i0 = cfg.grid.interface_edge
    R = cfg.model.R
    total = 0.0
    first = last = math.nan
    for v in m:
        if v.s > speed_threshold and v.rho[i0] >= R - jam_threshold:
            total += v.t_next - v.t
            if math.isnan(first):
                first = v.t
            last = v.t_next
    return {
        "label": cfg.label,
        "k": cfg.weight.k,
        "duration": total,
        "window_start": first,
        "window_end": last,
        "support": cfg.weight.support[1] - cfg.weight.support[0],
    }


# --------------------------------------------------------------------------
# presets
# --------------------------------------------------------------------------


def resolve(name: str, cells: list[int] | None = None, weight: int | None = None) -> ExperimentPreset:
    p = get_preset(name)
    changes = {}
    if cells:
        changes["cells"] = tuple(int(c) for c in cells)
    if weight is not None:
        if p.mode in ("sweep", "probe"):
            changes["weights"] = (int(weight),)
        changes["weight"] = int(weight)
    return p.with_(**changes) if changes else p


def run_preset(name: str, cells: list[int] | None = None, weight: int | None = None,
               jobs: int = 1, keep_runs: bool = True) -> ResultBundle:
    """Execute every run of a preset plus its comparisons and checks."""
    import time

    p = resolve(name, cells, weight)
    start = time.perf_counter()
    summary: dict = {"preset": p.to_dict()}
    runs: list[Trajectory] = []
    configs: list[RunConfig] = []

    if p.mode == "ladder":
        pairs = [(p.config(c), p.config(2 * c)) for c in p.cells]
        results = _map([(_task_pair, pr) for pr in pairs], jobs)
        rows = []
        for c, (res, trs) in zip(p.cells, results):
            rows.append({"cells": c, "E_rho": res["E_rho"], "E_y": res["E_y"], "runs": res["runs"]})
            configs.extend(t.config for t in trs)
            runs.extend(trs if keep_runs else ())
        summary["refinement"] = rows
        if len(rows) >= 3:
            study = dg.RefinementStudy([r["cells"] for r in rows], [r["E_rho"] for r in rows],
                                       [r["E_y"] for r in rows])
            dg.convergence_order(study)
            summary["orders"] = {"rho": study.order_rho, "y": study.order_y}
    elif p.mode in ("pair_local", "sweep"):
        ks = p.weights if p.mode == "sweep" else (p.weight,)
        pairs = [(p.config(p.cells[-1], k), p.config(p.cells[-1], k, coupling="local")) for k in ks]
        results = _map([(_task_pair, pr) for pr in pairs], jobs)
        rows = []
        for k, (res, trs) in zip(ks, results):
            rows.append({"k": k, "cells": p.cells[-1], "E1": res["E_rho"], "Einf": res["E_y"],
                         "runs": res["runs"]})
            configs.extend(t.config for t in trs)
            runs.extend(trs if keep_runs else ())
        summary["model_gap"] = rows
    elif p.mode == "probe":
        s_thr = p.extras.get("speed_threshold", 1e-3)
        jam_thr = p.extras.get("jam_threshold", 1e-3)
        cfgs = [p.config(p.cells[-1], k) for k in p.weights]
        results = _map([(_task_probe, (c, s_thr, jam_thr)) for c in cfgs], jobs)
        summary["artifact"] = [r for r, _ in results]
        d = [r["duration"] for r in summary["artifact"]]
        summary["durations_decreasing"] = bool(all(b < a for a, b in zip(d, d[1:])))
        configs.extend(cfgs)
    else:
        cfgs = [p.config(c) for c in p.cells]
        results = _map([(_task_single, (c,)) for c in cfgs], jobs)
        summary["runs"] = []
        for res, tr in results:
            summary["runs"].append(res)
            configs.append(tr.config)
            if keep_runs:
                runs.append(tr)
    timing = {"wall_time": time.perf_counter() - start, "jobs": jobs, "cpu_count": os.cpu_count()}
    return ResultBundle(name, configs, runs, summary, timing)


def run_config(cfg: RunConfig) -> ResultBundle:
    """Single run from a configuration file, with all applicable checks."""
    import time

    start = time.perf_counter()
    res, tr = _task_single(cfg)
    return ResultBundle(cfg.label or "run", [cfg], [tr], res, {"wall_time": time.perf_counter() - start})


def check_config(cfg: RunConfig) -> list[dg.DiagnosticsReport]:
    """Invariant suite on one run with full states."""
    tr = run(cfg.with_(store_states=True))
    return dg.standard_reports(tr)


def splitting_distances(cfg: RunConfig, m_values=range(1, 7)) -> list[dict]:
    """Final-time and space-time L1 distances of splitting runs to the coupled run."""
    coupled = cfg.with_(coupling="nonlocal", delta=None)
    out = []
    for m in m_values:
        delta = cfg.T / 2**m
        pr = dg.paired_distance(coupled, cfg.with_(coupling="splitting", delta=delta))
        final = float(np.abs(pr.a.rho_final - pr.b.rho_final).sum() * cfg.grid.dx)
        out.append({"m": m, "delta": delta, "L1_final": final, "L1_time": pr.e_rho, "y_gap": pr.e_y})
    return out


def weight_label(w: WeightProfile) -> str:
    return f"mu{w.k}" if w.k is not None else "custom"
