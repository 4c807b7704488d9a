"""Verification instruments for completed runs.

Checks return a :class:`DiagnosticsReport`; they never raise on a failed check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .model import (
    DomainError,
    FluxModel,
    QuadraticFlux,
    WeightProfile,
    constraint_gap,
    constraint_roots,
    max_flux,
)
from .numflux import FluxEvaluator, FluxKind, cfl_constant
from .solver import Marcher, Recorder, RunConfig, Trajectory, recorded_steps


class UsageError(ValueError):
    pass


@dataclass
class DiagnosticsReport:
    name: str
    passed: bool
    worst_margin: float
    location: dict = field(default_factory=dict)
    applicable: bool = True
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "applicable": self.applicable,
            "passed": self.passed,
            "worst_margin": self.worst_margin,
            "location": self.location,
            "details": self.details,
        }

    def line(self) -> str:
        status = "n/a " if not self.applicable else ("PASS" if self.passed else "FAIL")
        return f"[{status}] {self.name}: worst margin {self.worst_margin:.3e} at {self.location}"


def _inapplicable(name: str, reason: str) -> DiagnosticsReport:
    return DiagnosticsReport(name, True, math.nan, applicable=False, details={"reason": reason})


# --------------------------------------------------------------------------
# entropy inequalities
# --------------------------------------------------------------------------


def kruzhkov_flux(model: FluxModel, s: float, a, k):
    """``sign(a - k) (f(a) - f(k)) - s |a - k|``."""
    a = np.asarray(a, dtype=float)
    k = np.asarray(k, dtype=float)
    if np.any((a < 0) | (a > model.R)) or np.any((k < 0) | (k > model.R)):
        raise DomainError("kruzhkov_flux arguments must lie in [0, R]")
    f = model.flux.f
    out = np.sign(a - k) * (f(a) - f(k)) - s * np.abs(a - k)
    return out if out.ndim else float(out)


def default_k_samples(R: float, n: int = 21) -> np.ndarray:
    return np.linspace(0.0, R, n)


def entropy_margins(rho_n: np.ndarray, rho_next: np.ndarray, k: np.ndarray, model: FluxModel,
                    s: float, q: float, dt: float, dx: float, i0: int,
                    bulk: FluxKind, iface: FluxKind) -> np.ndarray:
    """``LHS - RHS`` of the discrete entropy inequality, shape ``(len(k), J)``."""
    k = np.asarray(k, dtype=float)[:, None]
    ext = np.empty(rho_n.size + 2)
    ext[1:-1] = rho_n
    ext[0], ext[-1] = rho_n[0], rho_n[-1]
    left, right = ext[None, :-1], ext[None, 1:]
    up_l, up_r = np.maximum(left, k), np.maximum(right, k)
    lo_l, lo_r = np.minimum(left, k), np.minimum(right, k)
    bulk_f = FluxEvaluator(bulk, model, s)
    iface_f = FluxEvaluator(iface, model, s)
    phi = bulk_f(up_l, up_r) - bulk_f(lo_l, lo_r)
    g_up = iface_f(up_l[:, i0], up_r[:, i0])
    g_lo = iface_f(lo_l[:, i0], lo_r[:, i0])
    phi[:, i0] = g_up - g_lo
    phi_int = np.minimum(g_up, q) - np.minimum(g_lo, q)
    lhs = (np.abs(rho_next[None, :] - k) - np.abs(rho_n[None, :] - k)) * dx + (phi[:, 1:] - phi[:, :-1]) * dt
    Fk = model.F(s, k[:, 0])
    resid = Fk - np.minimum(Fk, q)
    rhs = np.zeros_like(lhs)
    rhs[:, i0 - 1] = (resid + (phi[:, i0] - phi_int)) * dt
    rhs[:, i0] = (resid - (phi[:, i0] - phi_int)) * dt
    return lhs - rhs


def discrete_entropy_check(run: Trajectory, k_samples: Sequence[float] | None = None,
                           tol: float = 1e-12) -> DiagnosticsReport:
    """Worst violation of the cell entropy inequalities over all steps, cells and ``k``."""
    states = run.require_states()
    cfg = run.config
    model = cfg.model
    base_k = default_k_samples(model.R) if k_samples is None else np.asarray(k_samples, dtype=float)
    dx = cfg.grid.dx
    i0 = cfg.grid.interface_edge
    worst, where = -math.inf, {}
    for n in range(run.steps):
        s, q = float(run.s[n]), float(run.q[n])
        ks = base_k
        if math.isfinite(q) and q <= max_flux(model, s):
            ks = np.concatenate([base_k, constraint_roots(model, s, q)])
        dt = float(run.t[n + 1] - run.t[n])
        m = entropy_margins(states[n], states[n + 1], ks, model, s, q, dt, dx, i0,
                            cfg.bulk_flux, cfg.interface_flux)
        idx = np.unravel_index(int(np.argmax(m)), m.shape)
        if m[idx] > worst:
            worst = float(m[idx])
            where = {"step": n, "cell": int(idx[1]) - i0, "k": float(ks[idx[0]])}
    return DiagnosticsReport("discrete_entropy", worst <= tol, worst, where, details={"tol": tol})


# --------------------------------------------------------------------------
# total variation and BV bound
# --------------------------------------------------------------------------


def total_variation(profile) -> float:
    return float(np.sum(np.abs(np.diff(np.asarray(profile, dtype=float)))))


def bv_bound_constant(model: FluxModel, epsilon: float, s_samples: int = 1001,
                      rho_samples: int = 2001, sampled: bool = False) -> float:
    """``C_eps = 4 (1 + sup|dF/ds|) / C0`` with ``C0 = min |dF/drho|`` outside the eps-band.

    ``sup|dF/ds| = R`` since ``F = f - s rho``.
    """
    gap = constraint_gap(model).epsilon
    if not 0 < epsilon <= gap + 1e-15:
        raise DomainError(f"epsilon={epsilon} must lie in (0, gap={gap}]")
    return 4.0 * (1.0 + model.R) / bv_lower_slope(model, epsilon, s_samples, rho_samples, sampled)


def bv_lower_slope(model: FluxModel, epsilon: float, s_samples: int = 1001,
                   rho_samples: int = 2001, sampled: bool = False) -> float:
    """``C0``: minimum of ``|dF/drho|`` on ``[0, Sigma] x [0, R]`` minus the eps-band.

    Closed form for the quadratic flux unless ``sampled`` is set.
    """
    fl = model.flux
    if isinstance(fl, QuadraticFlux) and not sampled:
        # F = max - (vmax/R)(rho - rbar)^2, band edges at |rho - rbar| = sqrt(eps R / vmax)
        return 2.0 * math.sqrt(epsilon * fl.vmax / fl.R)
    c0 = math.inf
    for s in np.linspace(0.0, model.Sigma, s_samples):
        q_eps = max_flux(model, s) - epsilon
        lo, hi = constraint_roots(model, s, q_eps)
        rho = np.concatenate([np.linspace(0.0, lo, rho_samples), np.linspace(hi, model.R, rho_samples)])
        c0 = min(c0, float(np.min(np.abs(model.dF(s, rho)))))
    return c0


def _jump_variation(series: np.ndarray) -> np.ndarray:
    """``sum_{k<=n} |x^{k+1} - x^k|`` with ``x^0 := x^1``."""
    out = np.zeros_like(series)
    out[1:] = np.cumsum(np.abs(np.diff(series)))
    return out


def bv_bound_check(run: Trajectory, C_eps: float, tol: float = 1e-12) -> DiagnosticsReport:
    """``TV(rho^{n+1}) <= TV(rho^0) + 4R + C_eps * (var q + var s)`` at every step."""
    N = run.steps
    R = run.config.model.R
    s = run.s[:N]
    q = run.q[:N]
    if not np.all(np.isfinite(q)):
        return _inapplicable("bv_bound", "unconstrained run")
    bound = run.tv[0] + 4.0 * R + C_eps * (_jump_variation(q) + _jump_variation(s))
    margin = run.tv[1:N + 1] - bound
    n = int(np.argmax(margin))
    return DiagnosticsReport(
        "bv_bound", bool(margin[n] <= tol), float(margin[n]), {"step": n},
        details={"C_eps": C_eps, "max_tv": float(run.tv.max()), "bound_at_end": float(bound[-1])},
    )


# --------------------------------------------------------------------------
# one-sided decay of positive jumps
# --------------------------------------------------------------------------


def oslc_check(run: Trajectory, alpha: float | None = None, tol: float = 1e-12) -> DiagnosticsReport:
    """Decay bounds for ``D_j = max(rho_{j-1/2} - rho_{j+1/2}, 0)`` away from the interface."""
    cfg = run.config
    if cfg.bulk_flux not in (FluxKind.GODUNOV, FluxKind.ENGQUIST_OSHER):
        return _inapplicable("oslc", f"bulk flux {cfg.bulk_flux.value} is neither Godunov nor Engquist-Osher")
    if alpha is None:
        alpha = getattr(cfg.model.flux, "concavity", 0.0)
    if not alpha > 0:
        return _inapplicable("oslc", "flux is not uniformly concave")
    states = run.require_states()
    dx = cfg.grid.dx
    i0 = cfg.grid.interface_edge
    J = cfg.grid.J
    # edges 0..J; boundary edges carry D = 0 under constant extrapolation
    j_rel = np.arange(J + 1) - i0
    mask = np.abs(j_rel) >= 2
    mask[0] = mask[-1] = False
    lam_full = cfg.dt / dx
    worst1, loc1 = -math.inf, {}
    worst2, loc2 = -math.inf, {}

    def jumps(rho):
        D = np.zeros(J + 1)
        D[1:-1] = np.maximum(rho[:-1] - rho[1:], 0.0)
        return D

    D = jumps(states[0])
    for n in range(run.steps):
        dt = float(run.t[n + 1] - run.t[n])
        a = (dt / dx) * alpha / 4.0
        Dn = jumps(states[n + 1])
        M = np.maximum(np.maximum(np.roll(D, 1), D), np.roll(D, -1))
        m1 = np.where(mask, Dn - (M - a * M * M), -math.inf)
        k = int(np.argmax(m1))
        if m1[k] > worst1:
            worst1, loc1 = float(m1[k]), {"step": n, "edge": int(j_rel[k])}
        # the decay-in-time bound assumes the regular step; skip a clipped last step
        if dt >= (lam_full * dx) * (1 - 1e-9):
            a_full = lam_full * alpha / 4.0
            denom = np.minimum(np.abs(j_rel) - 1, n + 1) * a_full
            with np.errstate(divide="ignore"):
                m2 = np.where(mask, Dn - 1.0 / denom, -math.inf)
            k = int(np.argmax(m2))
            if m2[k] > worst2:
                worst2, loc2 = float(m2[k]), {"step": n, "edge": int(j_rel[k])}
        D = Dn
    worst = max(worst1, worst2)
    return DiagnosticsReport(
        "oslc", worst <= tol, worst,
        loc1 if worst1 >= worst2 else loc2,
        details={"bound1_margin": worst1, "bound2_margin": worst2, "alpha": alpha},
    )


# --------------------------------------------------------------------------
# regularity of the weighted density
# --------------------------------------------------------------------------


def xi_lipschitz_constant(weight: WeightProfile) -> float:
    """``K >= max(||mu||_1, TV(mu))``."""
    return max(weight.mass, weight.total_variation)


def xi_regularity_check(run: Trajectory, weight: WeightProfile | None = None,
                        xi: np.ndarray | None = None, max_pairs: int = 10_000,
                        tol: float = 1e-12) -> DiagnosticsReport:
    """``|xi(t) - xi(s)| <= R L K (|t - s| + 2 dt)`` over sampled pairs of time levels."""
    cfg = run.config
    if xi is None:
        if cfg.coupling not in ("nonlocal", "splitting"):
            return _inapplicable("xi_regularity", f"coupling {cfg.coupling} has no weighted density")
        xi = run.xi
    weight = weight or cfg.weight
    K = xi_lipschitz_constant(weight)
    R = cfg.model.R
    L = cfl_constant(cfg.model, cfg.bulk_flux)
    t = run.t
    dt = cfg.dt
    idx = np.unique(np.linspace(0, len(t) - 1, min(len(t), int(math.isqrt(max_pairs)))).astype(int))
    ti, tj = t[idx][:, None], t[idx][None, :]
    margin = np.abs(xi[idx][:, None] - xi[idx][None, :]) - R * L * K * (np.abs(ti - tj) + 2 * dt)
    np.fill_diagonal(margin, -math.inf)
    consecutive = np.abs(np.diff(xi)) - R * L * K * (np.diff(t) + 2 * dt)
    a, b = np.unravel_index(int(np.argmax(margin)), margin.shape)
    worst, where = float(margin[a, b]), {"step_a": int(idx[a]), "step_b": int(idx[b])}
    c = int(np.argmax(consecutive))
    if consecutive[c] > worst:
        worst, where = float(consecutive[c]), {"step_a": c, "step_b": c + 1}
    return DiagnosticsReport("xi_regularity", worst <= tol, worst, where, details={"K": K, "L": L})


# --------------------------------------------------------------------------
# distances between runs
# --------------------------------------------------------------------------


def _l1_distance(coarse: np.ndarray, fine: np.ndarray, factor: int, dx_fine: float) -> float:
    if factor == 1:
        return float(np.abs(coarse - fine).sum() * dx_fine)
    return float(np.abs(np.repeat(coarse, factor) - fine).sum() * dx_fine)


def l1_time_distance(pieces_a: Iterable, pieces_b: Iterable, factor: int, dx_fine: float) -> float:
    """Exact ``L1(0,T; L1)`` distance between two piecewise-constant-in-time runs.

    Each piece is ``(t0, t1, rho)``; ``pieces_a`` lives on the coarse mesh,
    prolonged by repetition onto the fine one.
    """
    ia, ib = iter(pieces_a), iter(pieces_b)
    pa, pb = next(ia, None), next(ib, None)
    t = 0.0
    total = 0.0
    while pa is not None and pb is not None:
        end = min(pa[1], pb[1])
        if end > t:
            total += (end - t) * _l1_distance(pa[2], pb[2], factor, dx_fine)
            t = end
        if pa[1] <= end:
            pa = next(ia, None)
        if pb[1] <= end:
            pb = next(ib, None)
    return total


def sup_distance(t_a: np.ndarray, y_a: np.ndarray, t_b: np.ndarray, y_b: np.ndarray) -> float:
    """Sup of the difference of two piecewise-linear curves."""
    grid = np.union1d(t_a, t_b)
    return float(np.max(np.abs(np.interp(grid, t_a, y_a) - np.interp(grid, t_b, y_b))))


def _stored_pieces(run: Trajectory) -> Iterator[tuple[float, float, np.ndarray]]:
    states = run.require_states()
    for n in range(run.steps):
        yield float(run.t[n]), float(run.t[n + 1]), states[n]


def _nesting_factor(coarse: RunConfig, fine: RunConfig) -> int:
    gc, gf = coarse.grid, fine.grid
    factor = round(gc.dx / gf.dx)
    if factor < 1 or gc.n_left * factor != gf.n_left or gc.n_right * factor != gf.n_right:
        raise UsageError("meshes do not nest")
    if abs(gc.dx - factor * gf.dx) > 1e-12 * gc.dx:
        raise UsageError("mesh sizes are not in an integer ratio")
    return factor


def refinement_errors(fine: Trajectory, coarse: Trajectory) -> tuple[float, float]:
    """``(||rho_c - rho_f||_{L1(0,T;L1)}, ||y_c - y_f||_inf)`` for stored runs."""
    factor = _nesting_factor(coarse.config, fine.config)
    if factor != 2:
        raise UsageError("fine mesh must have twice the cells of the coarse mesh")
    e_rho = l1_time_distance(_stored_pieces(coarse), _stored_pieces(fine), factor, fine.config.grid.dx)
    return e_rho, sup_distance(coarse.t, coarse.y, fine.t, fine.y)


def model_gap_errors(nonlocal_run: Trajectory, local_run: Trajectory) -> tuple[float, float]:
    """Same-mesh ``(E1, Einf)`` between the non-local and local runs."""
    if nonlocal_run.config.grid != local_run.config.grid or nonlocal_run.config.dt != local_run.config.dt:
        raise UsageError("runs must share mesh and time step")
    e1 = l1_time_distance(_stored_pieces(nonlocal_run), _stored_pieces(local_run), 1,
                          nonlocal_run.config.grid.dx)
    return e1, sup_distance(nonlocal_run.t, nonlocal_run.y, local_run.t, local_run.y)


@dataclass
class PairedRuns:
    a: Trajectory
    b: Trajectory
    e_rho: float
    e_y: float


def _live_pieces(marcher: Marcher, rec: Recorder):
    for view in recorded_steps(marcher, rec):
        yield view.t, view.t_next, view.rho


def paired_distance(cfg_a: RunConfig, cfg_b: RunConfig) -> PairedRuns:
    """Run two configurations in lockstep and measure their distances.

    Memory stays O(cells): states are compared as they are produced.  ``cfg_a``
    may be coarser than ``cfg_b`` by an integer factor.
    """
    factor = _nesting_factor(cfg_a, cfg_b)
    ma, mb = Marcher(cfg_a), Marcher(cfg_b)
    ra, rb = Recorder(ma), Recorder(mb)
    e_rho = l1_time_distance(_live_pieces(ma, ra), _live_pieces(mb, rb), factor, cfg_b.grid.dx)
    ta, tb = ra.finish(), rb.finish()
    return PairedRuns(ta, tb, e_rho, sup_distance(ta.t, ta.y, tb.t, tb.y))


# --------------------------------------------------------------------------
# refinement studies
# --------------------------------------------------------------------------


@dataclass
class RefinementStudy:
    cells: list[int]
    e_rho: list[float]
    e_y: list[float]
    order_rho: float = math.nan
    order_y: float = math.nan

    def __post_init__(self):
        if any(b != 2 * a for a, b in zip(self.cells, self.cells[1:])):
            raise UsageError("cell counts must double from level to level")

    def to_dict(self) -> dict:
        return {
            "cells": list(self.cells),
            "E_rho": list(self.e_rho),
            "E_y": list(self.e_y),
            "order_rho": self.order_rho,
            "order_y": self.order_y,
        }


def fitted_order(errors: Sequence[float]) -> float:
    """Negated least-squares slope of ``log2(error)`` against the level index."""
    e = np.asarray(errors, dtype=float)
    if e.size < 3:
        raise UsageError("need at least three levels")
    if np.any(e <= 0):
        raise DomainError("errors must be positive")
    slope = np.polyfit(np.arange(e.size), np.log2(e), 1)[0]
    return float(-slope)


def convergence_order(study: RefinementStudy) -> tuple[float, float]:
    study.order_rho = fitted_order(study.e_rho)
    study.order_y = fitted_order(study.e_y)
    return study.order_rho, study.order_y


# --------------------------------------------------------------------------
# continuous dependence on the data
# --------------------------------------------------------------------------


@dataclass
class StabilityCurves:
    t: np.ndarray
    l1_gap: np.ndarray
    y_gap: np.ndarray

    @property
    def initial_l1(self) -> float:
        return float(self.l1_gap[0])

    @property
    def final_l1(self) -> float:
        return float(self.l1_gap[-1])


def stability_probe(config: RunConfig, perturbed: RunConfig) -> StabilityCurves:
    """Pointwise-in-time ``||rho1 - rho2||_1`` and ``|y1 - y2|`` for two data sets."""
    same = config.with_(initial=perturbed.initial, y0=perturbed.y0)
    if same != perturbed:
        raise UsageError("configs may differ only in the initial density and position")
    dx = config.grid.dx
    ma, mb = Marcher(config), Marcher(perturbed)
    ts, l1, dy = [], [], []
    ga, gb = iter(ma), iter(mb)
    for va, vb in zip(ga, gb):
        ts.append(va.t)
        l1.append(float(np.abs(va.rho - vb.rho).sum() * dx))
        dy.append(abs(va.y - vb.y))
    # zip stops on the first exhausted iterator; let the second finish its last step
    next(gb, None)
    ts.append(ma.t)
    l1.append(float(np.abs(ma.rho - mb.rho).sum() * dx))
    dy.append(abs(ma.y - mb.y))
    return StabilityCurves(np.array(ts), np.array(l1), np.array(dy))


def density_offset(config: RunConfig, offset: float) -> RunConfig:
    """Shift every value of the initial profile by ``offset`` (clipped to ``[0, R]``)."""
    R = config.model.R
    prof = config.initial
    values = tuple(float(np.clip(v + offset, 0.0, R)) for v in prof.values)
    return config.with_(initial=type(prof)(prof.breakpoints, values))


# --------------------------------------------------------------------------
# run-level summary
# --------------------------------------------------------------------------


def linf_report(run: Trajectory) -> DiagnosticsReport:
    """Observed density range over every step against ``[0, R]``."""
    R = run.config.model.R
    lo, hi = run.rho_min, run.rho_max
    margin = max(-lo, hi - R)
    return DiagnosticsReport("linf_stability", bool(margin <= 0.0), margin, details={"min": lo, "max": hi})


def mass_report(run: Trajectory, tol: float = 1e-10) -> DiagnosticsReport:
    drift = run.mass_drift()
    return DiagnosticsReport("mass_conservation", abs(drift) <= tol, abs(drift),
                             details={"inflow": run.boundary_inflow, "outflow": run.boundary_outflow})


def standard_reports(run: Trajectory, epsilon: float | None = None) -> list[DiagnosticsReport]:
    """All checks applicable to ``run`` given what it stored."""
    cfg = run.config
    reports = [linf_report(run), mass_report(run)]
    gap = constraint_gap(cfg.model)
    if gap.satisfied and cfg.interface_flux is FluxKind.GODUNOV:
        eps = gap.epsilon if epsilon is None else epsilon
        reports.append(bv_bound_check(run, bv_bound_constant(cfg.model, eps)))
    reports.append(xi_regularity_check(run))
    if run.states is not None:
        reports.append(discrete_entropy_check(run))
        reports.append(oslc_check(run))
    return reports
