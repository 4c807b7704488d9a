"""Time marching in the frame of the slow vehicle.

The vehicle sits at the mesh edge ``x = 0``.  Each step first updates the
vehicle speed ``s`` and the constraint level ``q = Q(s)`` from the current
density, then applies the conservative update with the flux at ``x = 0``
capped at ``q``.  Four couplings share that loop:

* ``nonlocal``: ``s = omega(sum_j rho_j mu_j dx)``;
* ``local``: ``s = omega(rho)`` in the first cell ahead of the vehicle;
* ``frozen``: ``(s, q)`` prescribed per step;
* ``splitting``: the non-local speed refreshed only at window starts.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Sequence

import numpy as np

from . import kernels
from .model import (
    DomainError,
    FluxModel,
    PiecewiseConstantProfile,
    QuadraticFlux,
    WeightProfile,
    critical_density,
    discretize_weight,
)
from .numflux import MAX_CFL, FluxEvaluator, FluxKind, cfl_constant, rusanov_constant


class ConfigError(ValueError):
    pass


class CFLViolation(ValueError):
    pass


COUPLINGS = ("nonlocal", "local", "frozen", "splitting")


@dataclass(frozen=True)
class Grid:
    """Uniform mesh ``[-n_left*dx, n_right*dx]``; the vehicle sits on the edge ``x = 0``."""

    dx: float
    n_left: int
    n_right: int

    def __post_init__(self):
        if not self.dx > 0:
            raise ConfigError(f"dx={self.dx} must be positive")
        if self.n_left < 2 or self.n_right < 2:
            raise ConfigError("need at least two cells on each side of the interface")

    @classmethod
    def from_bounds(cls, x_min: float, x_max: float, J: int) -> "Grid":
        """Mesh of ``J`` cells on ``[x_min, x_max]``; ``x = 0`` must land on an edge."""
        if J < 4 or not x_min < 0 < x_max:
            raise ConfigError(f"invalid mesh [{x_min}, {x_max}] with {J} cells")
        dx = (x_max - x_min) / J
        n_left = round(-x_min / dx)
        if abs(n_left * dx + x_min) > 1e-9 * dx * max(1, n_left):
            raise ConfigError(f"x=0 is not a cell edge of [{x_min}, {x_max}] with {J} cells")
        return cls(dx, n_left, J - n_left)

    @classmethod
    def covering(cls, x_min: float, x_max: float, dx: float) -> "Grid":
        """Smallest aligned mesh of step ``dx`` containing ``[x_min, x_max]``."""
        n_left = math.ceil(-x_min / dx - 1e-9)
        n_right = math.ceil(x_max / dx - 1e-9)
        return cls(dx, n_left, n_right)

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.dx / factor, self.n_left * factor, self.n_right * factor)

    @property
    def J(self) -> int:
        return self.n_left + self.n_right

    @property
    def x_min(self) -> float:
        return -self.n_left * self.dx

    @property
    def x_max(self) -> float:
        return self.n_right * self.dx

    @property
    def interface_edge(self) -> int:
        return self.n_left

    @property
    def edges(self) -> np.ndarray:
        return np.arange(-self.n_left, self.n_right + 1) * self.dx

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(-self.n_left, self.n_right) + 0.5) * self.dx

    def to_dict(self) -> dict:
        return {"dx": self.dx, "n_left": self.n_left, "n_right": self.n_right}


@dataclass(frozen=True)
class RunConfig:
    grid: Grid
    model: FluxModel
    weight: WeightProfile
    initial: PiecewiseConstantProfile  # road coordinates
    y0: float
    T: float
    cfl_target: float = 0.5
    bulk_flux: FluxKind = FluxKind.RUSANOV
    interface_flux: FluxKind = FluxKind.GODUNOV
    coupling: str = "nonlocal"
    delta: float | None = None
    frozen: tuple[float, float] | None = None  # constant (s, q) for the frozen coupling
    snapshots: tuple[float, ...] = ()
    store_states: bool = False
    label: str = ""

    def __post_init__(self):
        if not 0 < self.cfl_target <= 1:
            raise ConfigError(f"cfl_target={self.cfl_target} must lie in (0, 1]")
        if not self.T > 0:
            raise ConfigError(f"T={self.T} must be positive")
        if self.coupling not in COUPLINGS:
            raise ConfigError(f"unknown coupling {self.coupling!r}")
        if self.coupling == "splitting" and self.delta is None:
            raise ConfigError("splitting coupling needs delta")
        if self.frozen is not None:
            s_, q_ = self.frozen
            if not 0 <= s_ <= self.model.Sigma or not q_ >= 0:
                raise ConfigError(f"frozen (s, q) = {self.frozen} out of range")
        if any(not 0 <= t <= self.T for t in self.snapshots):
            raise ConfigError("snapshot times must lie in [0, T]")
        object.__setattr__(self, "bulk_flux", FluxKind(self.bulk_flux))
        object.__setattr__(self, "interface_flux", FluxKind(self.interface_flux))
        if self.cfl_target > MAX_CFL[self.bulk_flux]:
            raise ConfigError(
                f"cfl_target={self.cfl_target} exceeds {MAX_CFL[self.bulk_flux]} for {self.bulk_flux.value}"
            )
        self.initial.check_range(self.model.R)

    @property
    def L(self) -> float:
        return cfl_constant(self.model, self.bulk_flux)

    @property
    def dt(self) -> float:
        return self.cfl_target * self.grid.dx / self.L

    def time_levels(self) -> np.ndarray:
        """``t^0 .. t^N`` with a fixed step and the last step clipped onto ``T``."""
        dt = self.dt
        N = max(1, math.ceil(self.T / dt - 1e-9))
        times = np.arange(N + 1) * dt
        times[-1] = self.T
        return times

    def initial_density(self) -> np.ndarray:
        """Cell means of ``rho_o(. + y0)`` on the mesh."""
        return self.initial.shifted(self.y0).cell_averages(self.grid.edges)

    def with_(self, **changes) -> "RunConfig":
        return replace(self, **changes)


@dataclass
class Trajectory:
    """Per-time-level series; row ``n`` holds the values used on ``[t^n, t^{n+1})``.

    The last row describes the final state at ``T``.
    """

    config: RunConfig
    t: np.ndarray
    y: np.ndarray
    s: np.ndarray
    xi: np.ndarray
    q: np.ndarray
    interface_flux: np.ndarray
    constraint_active: np.ndarray
    tv: np.ndarray
    mass: np.ndarray
    rho_final: np.ndarray
    rho_initial: np.ndarray
    snapshots: dict[float, tuple[float, np.ndarray]] = field(default_factory=dict)
    states: np.ndarray | None = None
    boundary_inflow: float = 0.0
    boundary_outflow: float = 0.0
    boundary_activity: float = 0.0
    rho_min: float = math.nan
    rho_max: float = math.nan
    wall_time: float = 0.0

    @property
    def steps(self) -> int:
        return len(self.t) - 1

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.t)

    def mass_drift(self) -> float:
        """Mass change not explained by boundary fluxes."""
        dx = self.config.grid.dx
        change = (math.fsum(self.rho_final) - math.fsum(self.rho_initial)) * dx
        return float(change - (self.boundary_inflow - self.boundary_outflow))

    def require_states(self) -> np.ndarray:
        if self.states is None:
            raise ConfigError("this check needs a run with store_states=True")
        return self.states


# --------------------------------------------------------------------------
# single-step operations
# --------------------------------------------------------------------------


def weight_mass(mu_avg: np.ndarray, dx: float) -> float:
    """Discrete mass of the weight, snapped to 1 when it is 1 up to rounding."""
    m = math.fsum(mu_avg) * dx
    return 1.0 if abs(m - 1.0) <= 1e-12 else m


def weighted_density(rho: np.ndarray, mu_avg: np.ndarray, dx: float, window: slice | None = None,
                     mass: float | None = None) -> float:
    """``xi = sum_j rho_j mu_j dx``, anchored at the first cell of the window.

    Written as ``rho_a m + dx sum_j (rho_j - rho_a) mu_j`` so that constant data
    give ``xi = c`` exactly for a normalized weight.
    """
    if window is None:
        nz = np.flatnonzero(mu_avg)
        window = slice(int(nz[0]), int(nz[-1]) + 1) if nz.size else slice(0, 0)
    r, w = rho[window], mu_avg[window]
    if r.size == 0:
        return 0.0
    if mass is None:
        mass = weight_mass(mu_avg, dx)
    anchor = float(r[0])
    return anchor * mass + float(np.dot(r - anchor, w)) * dx


def speed_update(rho: np.ndarray, model: FluxModel, mu_avg: np.ndarray, dx: float,
                 window: slice | None = None, mass: float | None = None) -> tuple[float, float, float]:
    """Return ``(s, q, xi)`` for the next step from the current density.

    ``omega`` is evaluated at ``xi`` clamped to ``[0, R]``: rounding in the
    weighted sum can leave that range by an ulp.
    """
    xi = weighted_density(rho, mu_avg, dx, window, mass)
    s = float(model.omega(min(max(xi, 0.0), model.R)))
    return s, float(model.Q(s)), xi


class _Stepper:
    """Holds per-run constants for repeated single steps."""

    def __init__(self, grid: Grid, model: FluxModel, bulk: FluxKind, iface: FluxKind):
        self.grid = grid
        self.model = model
        self.bulk = FluxKind(bulk)
        self.iface = FluxKind(iface)
        self.i0 = grid.interface_edge
        self.fast = isinstance(model.flux, QuadraticFlux)
        self._kind_code = {
            FluxKind.RUSANOV: kernels.RUSANOV,
            FluxKind.GODUNOV: kernels.GODUNOV,
            FluxKind.ENGQUIST_OSHER: kernels.ENGQUIST_OSHER,
            FluxKind.RUSANOV_LOCAL: kernels.RUSANOV_LOCAL,
        }[self.bulk]
        self._cache_s = None

    def _prepare(self, s: float):
        if s != self._cache_s:
            self._cache_s = s
            self._rbar = critical_density(self.model, s)
            self._C = rusanov_constant(self.model, s)
            self._iface_eval = FluxEvaluator(self.iface, self.model, s)
            self._bulk_eval = FluxEvaluator(self.bulk, self.model, s)

    def interface_value(self, rho: np.ndarray, s: float, q: float) -> tuple[float, bool]:
        a, b = float(rho[self.i0 - 1]), float(rho[self.i0])
        if self.fast and self.iface is FluxKind.GODUNOV:
            fl = self.model.flux
            rbar = 0.5 * fl.R * (1.0 - s / fl.vmax)
            da = a if a < rbar else rbar
            sb = b if b > rbar else rbar
            fa = fl.vmax * da * (1.0 - da / fl.R) - s * da
            fb = fl.vmax * sb * (1.0 - sb / fl.R) - s * sb
            base = fa if fa < fb else fb
        else:
            self._prepare(s)
            base = float(self._iface_eval(a, b))
        return (q, True) if base > q else (base, False)

    def __call__(self, rho: np.ndarray, out: np.ndarray, lam: float, s: float, g0: float):
        """Advance ``rho`` into ``out``; return boundary fluxes and (tv, sum, min, max) of ``out``."""
        if self.fast:
            fl = self.model.flux
            gl, gr, tv, total, lo, hi = kernels.step_quadratic(
                rho, out, lam, self._kind_code, s, fl.df_sup + s,
                0.5 * fl.R * (1.0 - s / fl.vmax), fl.vmax, fl.R, self.i0, g0,
            )
            return gl, gr, (tv, total, lo, hi)
        self._prepare(s)
        ext = np.empty(rho.size + 2)
        ext[1:-1] = rho
        ext[0], ext[-1] = rho[0], rho[-1]
        G = self._bulk_eval(ext[:-1], ext[1:])
        G[self.i0] = g0
        np.subtract(rho, lam * (G[1:] - G[:-1]), out=out)
        return float(G[0]), float(G[-1]), state_stats(out)


def state_stats(rho: np.ndarray) -> tuple[float, float, float, float]:
    return float(np.abs(np.diff(rho)).sum()), float(rho.sum()), float(rho.min()), float(rho.max())


def step(rho: np.ndarray, grid: Grid, model: FluxModel, s: float, q: float, dt: float,
         bulk: FluxKind = FluxKind.RUSANOV, iface: FluxKind = FluxKind.GODUNOV,
         cfl_target: float = 1.0) -> np.ndarray:
    """One marching step with speed ``s`` and constraint level ``q``."""
    L = cfl_constant(model, bulk)
    cfl_target = min(cfl_target, MAX_CFL[FluxKind(bulk)])
    if dt * L / grid.dx > cfl_target * (1 + 1e-12):
        raise CFLViolation(f"lambda*L = {dt * L / grid.dx:.6g} exceeds {cfl_target}")
    stepper = _Stepper(grid, model, bulk, iface)
    g0, _ = stepper.interface_value(rho, s, q)
    out = np.empty_like(rho)
    stepper(np.ascontiguousarray(rho, dtype=float), out, dt / grid.dx, s, g0)
    return out


# --------------------------------------------------------------------------
# marching
# --------------------------------------------------------------------------


@dataclass
class StepView:
    """State ``rho^n`` and the quantities used to advance it over ``[t, t_next)``.

    ``rho`` is a live buffer, valid until the iterator resumes.
    """

    n: int
    t: float
    t_next: float
    rho: np.ndarray
    y: float
    s: float
    q: float
    xi: float
    flux0: float
    active: bool
    stats: tuple[float, float, float, float]


SpeedSource = Callable[[int, np.ndarray], tuple[float, float, float]]


class Marcher:
    """Iterator over the steps of one run; final state available afterwards."""

    def __init__(self, config: RunConfig, speed_source: SpeedSource | None = None,
                 final_source: SpeedSource | None = None):
        self.config = config
        grid = config.grid
        model = config.model
        self.times = config.time_levels()
        self.N = len(self.times) - 1
        self.lam_full = config.dt / grid.dx
        self.rho = config.initial_density()
        self._buf = np.empty_like(self.rho)
        self.stats = state_stats(self.rho)
        self.y = float(config.y0)
        self.t = 0.0
        self.inflow = 0.0
        self.outflow = 0.0
        self.stepper = _Stepper(grid, model, config.bulk_flux, config.interface_flux)
        self.mu_avg = discretize_weight(config.weight, grid.edges)
        nz = np.flatnonzero(self.mu_avg)
        self.window = slice(int(nz[0]), int(nz[-1]) + 1) if nz.size else slice(0, 0)
        self.mu_mass = weight_mass(self.mu_avg, grid.dx)
        self.speed_source = speed_source or self._default_source()
        self.final_source = final_source or self.speed_source

    def _nonlocal(self, n: int, rho: np.ndarray):
        return speed_update(rho, self.config.model, self.mu_avg, self.config.grid.dx, self.window, self.mu_mass)

    def _local(self, n: int, rho: np.ndarray):
        model = self.config.model
        xi = float(rho[self.config.grid.interface_edge])
        s = float(model.omega(min(max(xi, 0.0), model.R)))
        return s, float(model.Q(s)), xi

    def _default_source(self) -> SpeedSource:
        cfg = self.config
        if cfg.coupling == "nonlocal":
            return self._nonlocal
        if cfg.coupling == "local":
            return self._local
        if cfg.coupling == "splitting":
            window = splitting_windows(cfg)
            held: list = []

            def split(n, rho):
                if not held or n >= len(window) or window[n] != window[n - 1]:
                    held[:] = [self._nonlocal(n, rho)]
                return held[0]

            return split
        if cfg.frozen is not None:
            s_, q_ = float(cfg.frozen[0]), float(cfg.frozen[1])
            return lambda n, rho: (s_, q_, math.nan)
        raise ConfigError("frozen coupling needs explicit (s, q) series")

    def evaluate(self, n: int, rho: np.ndarray, source: SpeedSource) -> tuple[float, float, float, float, bool]:
        s, q, xi = source(n, rho)
        if not 0 <= s <= self.config.model.Sigma + 1e-14:
            raise DomainError(f"speed {s} outside [0, Sigma] at step {n}")
        g0, active = self.stepper.interface_value(rho, s, q)
        return s, q, xi, g0, active

    def __iter__(self) -> Iterator[StepView]:
        times = self.times
        dx = self.config.grid.dx
        for n in range(self.N):
            t0, t1 = float(times[n]), float(times[n + 1])
            s, q, xi, g0, active = self.evaluate(n, self.rho, self.speed_source)
            yield StepView(n, t0, t1, self.rho, self.y, s, q, xi, g0, active, self.stats)
            dt = t1 - t0
            lam = self.lam_full if n < self.N - 1 else dt / dx
            gl, gr, self.stats = self.stepper(self.rho, self._buf, lam, s, g0)
            self.inflow += dt * gl
            self.outflow += dt * gr
            self.rho, self._buf = self._buf, self.rho
            self.y = self.y + dt * s
            self.t = t1

    def final_view(self) -> StepView:
        s, q, xi, g0, active = self.evaluate(self.N, self.rho, self.final_source)
        return StepView(self.N, self.t, self.t, self.rho, self.y, s, q, xi, g0, active, self.stats)


def splitting_windows(config: RunConfig) -> np.ndarray:
    """Window index of every step: step ``n`` lies in window ``floor(t^n / delta)``.

    Windows are fixed in time, so ``delta = dt`` refreshes at every step and
    ``delta = T`` gives one window even though the last step is clipped.
    """
    dt = config.dt
    if config.delta is None or config.delta < dt * (1 - 1e-12):
        raise ConfigError(f"splitting delta={config.delta} shorter than dt={dt}")
    t = config.time_levels()[:-1]
    return np.floor(t / config.delta * (1 + 1e-12) + 1e-12).astype(np.int64)


class Recorder:
    """Accumulates :class:`StepView` rows into a :class:`Trajectory`."""

    def __init__(self, marcher: Marcher):
        cfg = marcher.config
        self.marcher = marcher
        self.config = cfg
        N = marcher.N
        self.cols = {k: np.empty(N + 1) for k in ("t", "y", "s", "xi", "q", "flux", "tv", "mass")}
        self.active = np.zeros(N + 1, dtype=bool)
        self.states = np.empty((N + 1, cfg.grid.J)) if cfg.store_states else None
        self.snap_req = sorted(set(cfg.snapshots))
        self.snaps: dict[float, tuple[float, np.ndarray]] = {}
        self.rho0 = marcher.rho.copy()
        self.activity = 0.0
        self.lo = math.inf
        self.hi = -math.inf
        self.start = time.perf_counter()

    def record(self, v: StepView) -> None:
        n = v.n
        rho = v.rho
        tv, total, lo, hi = v.stats
        if lo < 0.0 or hi > self.config.model.R:
            raise AssertionError(f"density left [0, R] at step {n}: [{lo}, {hi}]")
        self.lo = min(self.lo, lo)
        self.hi = max(self.hi, hi)
        cols = self.cols
        cols["t"][n] = v.t
        cols["y"][n] = v.y
        cols["s"][n] = v.s
        cols["xi"][n] = v.xi
        cols["q"][n] = v.q
        cols["flux"][n] = v.flux0
        self.active[n] = v.active
        cols["tv"][n] = tv
        cols["mass"][n] = total * self.config.grid.dx
        self.activity = max(self.activity, abs(rho[0] - self.rho0[0]), abs(rho[-1] - self.rho0[-1]))
        if self.states is not None:
            self.states[n] = rho
        while self.snap_req and self.snap_req[0] <= v.t + 1e-12:
            self.snaps[self.snap_req.pop(0)] = (v.t, rho.copy())

    def finish(self) -> Trajectory:
        m = self.marcher
        self.record(m.final_view())
        cols = self.cols
        return Trajectory(
            config=self.config,
            t=cols["t"],
            y=cols["y"],
            s=cols["s"],
            xi=cols["xi"],
            q=cols["q"],
            interface_flux=cols["flux"],
            constraint_active=self.active,
            tv=cols["tv"],
            mass=cols["mass"],
            rho_final=m.rho.copy(),
            rho_initial=self.rho0,
            snapshots=self.snaps,
            states=self.states,
            boundary_inflow=m.inflow,
            boundary_outflow=m.outflow,
            boundary_activity=float(self.activity),
            rho_min=self.lo,
            rho_max=self.hi,
            wall_time=time.perf_counter() - self.start,
        )


def recorded_steps(marcher: Marcher, recorder: Recorder) -> Iterator[StepView]:
    """Iterate a run while recording it; ``recorder.finish()`` afterwards."""
    for view in marcher:
        recorder.record(view)
        yield view


def _collect(marcher: Marcher) -> Trajectory:
    rec = Recorder(marcher)
    for _ in recorded_steps(marcher, rec):
        pass
    return rec.finish()


def run(config: RunConfig) -> Trajectory:
    """Dispatch on ``config.coupling``; frozen runs need a constant ``frozen`` pair."""
    if config.coupling == "frozen" and config.frozen is None:
        raise ConfigError("use run_frozen for prescribed speed series")
    return _collect(Marcher(config))


def run_coupled(config: RunConfig) -> Trajectory:
    return _collect(Marcher(config.with_(coupling="nonlocal")))


def run_local(config: RunConfig) -> Trajectory:
    return _collect(Marcher(config.with_(coupling="local")))


def run_splitting(config: RunConfig, delta: float) -> Trajectory:
    return _collect(Marcher(config.with_(coupling="splitting", delta=delta)))


def run_frozen(config: RunConfig, s_series: Sequence[float], q_series: Sequence[float]) -> Trajectory:
    """March with prescribed per-step ``(s^n, q^n)``; no speed feedback."""
    cfg = config.with_(coupling="frozen")
    N = len(cfg.time_levels()) - 1
    s_series = np.asarray(s_series, dtype=float)
    q_series = np.asarray(q_series, dtype=float)
    if len(s_series) < N or len(q_series) < N:
        raise ConfigError(f"need {N} prescribed steps, got {len(s_series)} speeds / {len(q_series)} levels")

    def source(n, rho):
        k = min(n, len(s_series) - 1, len(q_series) - 1)
        return float(s_series[k]), float(q_series[k]), math.nan

    return _collect(Marcher(cfg, speed_source=source))


def march(config: RunConfig) -> Marcher:
    """Streaming access to a run, for comparisons that cannot store all states."""
    return Marcher(config)
