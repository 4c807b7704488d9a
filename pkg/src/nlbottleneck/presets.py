"""Named experiment set-ups.

Each preset fixes the model, the road window, the initial data and the final
time.  ``cells`` always counts cells on the road window; the bus-frame mesh
keeps that step and adds pads so that waves leaving the window do not touch the
artificial boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .model import (
    FluxModel,
    MinSpeed,
    PiecewiseConstantProfile,
    QuadraticConstraint,
    QuadraticFlux,
    RationalThenLinear,
    WeightProfile,
)
from .numflux import FluxKind
from .solver import ConfigError, Grid, RunConfig

PRESET_NAMES = (
    "validation",
    "convergence",
    "case1",
    "case2",
    "case3",
    "compare_local",
    "weight_sweep",
    "artifact_probe",
)

# ladders are built by refining a mesh of this many road cells, so levels nest
BASE_CELLS = 160


def rational_speed_model() -> FluxModel:
    """Calibrated ``alpha/(beta+rho)^2`` speed, 25% capacity drop at the vehicle."""
    return FluxModel(
        QuadraticFlux(1.0, 1.0),
        RationalThenLinear.calibrated(0.7, 0.4, 0.6),
        QuadraticConstraint(0.75),
    )


def min_speed_model() -> FluxModel:
    """``omega = min(0.3, 1 - rho)`` with a 40% capacity drop."""
    return FluxModel(QuadraticFlux(1.0, 1.0), MinSpeed(0.3), QuadraticConstraint(0.6))


def road_grid(road: tuple[float, float], y0: float, cells: int,
              pad_left: float = 0.0, pad_right: float = 0.0) -> Grid:
    """Bus-frame mesh for a road window of ``cells`` cells, vehicle starting at ``y0``.

    The mesh is built on the coarsest ancestor of ``cells`` (halving down to
    ``BASE_CELLS``) and refined, so that meshes of a doubling ladder nest.
    """
    if cells < 4:
        raise ConfigError(f"cells={cells} too small")
    base = cells
    while base % 2 == 0 and base > BASE_CELLS:
        base //= 2
    a, b = road
    dx = (b - a) / base
    grid = Grid.covering(a - y0 - pad_left, b - y0 + pad_right, dx)
    return grid.refined(cells // base) if cells != base else grid


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    description: str
    model: FluxModel
    road: tuple[float, float]
    initial: PiecewiseConstantProfile
    y0: float
    T: float
    weight: int
    cells: tuple[int, ...]
    weights: tuple[int, ...] = ()
    pad_left: float = 0.0
    pad_right: float = 0.0
    snapshots: tuple[float, ...] = ()
    cfl_target: float = 0.5
    bulk_flux: FluxKind = FluxKind.RUSANOV_LOCAL
    interface_flux: FluxKind = FluxKind.GODUNOV
    mode: str = "single"
    extras: dict = field(default_factory=dict, compare=False)

    def config(self, cells: int | None = None, weight: int | WeightProfile | None = None,
               **changes) -> RunConfig:
        cells = self.cells[-1] if cells is None else cells
        w = self.weight if weight is None else weight
        w = w if isinstance(w, WeightProfile) else WeightProfile.mu(int(w))
        wlabel = f"mu{w.k}" if w.k is not None else "custom"
        cfg = RunConfig(
            grid=road_grid(self.road, self.y0, cells, self.pad_left, self.pad_right),
            model=self.model,
            weight=w,
            initial=self.initial,
            y0=self.y0,
            T=self.T,
            cfl_target=self.cfl_target,
            bulk_flux=self.bulk_flux,
            interface_flux=self.interface_flux,
            snapshots=self.snapshots,
            label=f"{self.name}-J{cells}-{wlabel}",
        )
        return cfg.with_(**changes) if changes else cfg

    def configs(self) -> list[RunConfig]:
        """Every run the preset needs, in execution order."""
        if self.mode == "ladder":
            return [self.config(c) for c in self.ladder_cells()]
        if self.mode == "pair_local":
            return [self.config(self.cells[-1]), self.config(self.cells[-1], coupling="local")]
        if self.mode == "sweep":
            out = []
            for k in self.weights:
                out.append(self.config(self.cells[-1], k))
                out.append(self.config(self.cells[-1], k, coupling="local"))
            return out
        if self.mode == "probe":
            return [self.config(self.cells[-1], k) for k in self.weights]
        return [self.config(c) for c in self.cells]

    def ladder_cells(self) -> list[int]:
        """Mesh counts to run: each listed level plus its refinement."""
        return sorted(set(self.cells) | {2 * c for c in self.cells})

    def with_(self, **changes) -> "ExperimentPreset":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "model": self.model.to_dict(),
            "road": list(self.road),
            "initial": self.initial.to_dict(),
            "y0": self.y0,
            "T": self.T,
            "weight": self.weight,
            "weights": list(self.weights),
            "cells": list(self.cells),
            "pad_left": self.pad_left,
            "pad_right": self.pad_right,
            "snapshots": list(self.snapshots),
            "cfl_target": self.cfl_target,
            "bulk_flux": self.bulk_flux.value,
            "interface_flux": self.interface_flux.value,
            "mode": self.mode,
        }


# final time used for every min-speed case
CASE_T = 0.7245
CASE_SIGMA = 0.3
# room for the numerical tail of a jam-side rarefaction (edge speed -1 in the road frame)
CASE_TAIL = 0.3


def _validation(**kw) -> ExperimentPreset:
    T = 13.0
    base = dict(
        name="validation",
        description="bus overtaken by a small platoon; calibrated rational speed law",
        model=rational_speed_model(),
        road=(0.0, 11.0),
        initial=PiecewiseConstantProfile.indicator(0.5, 0.5, 1.0),
        y0=1.5,
        T=T,
        weight=4,
        cells=(1100,),
        # the platoon tail drifts back in the bus frame at speed 0.2
        pad_left=3.0,
        snapshots=(0.0, 3.25, 6.5, 9.75, 13.0),
    )
    base.update(kw)
    return ExperimentPreset(**base)


def _case(name: str, left: float, right: float, y0: float, description: str, **kw) -> ExperimentPreset:
    base = dict(
        name=name,
        description=description,
        model=min_speed_model(),
        road=(0.0, 1.0),
        initial=PiecewiseConstantProfile.riemann(left, right, 0.5),
        y0=y0,
        T=CASE_T,
        weight=3,
        cells=(1000,),
        # keep every road point the vehicle leaves behind inside the mesh
        pad_left=CASE_SIGMA * CASE_T + CASE_TAIL,
        snapshots=(0.0, CASE_T / 2, CASE_T),
    )
    base.update(kw)
    return ExperimentPreset(**base)


def get_preset(name: str) -> ExperimentPreset:
    if name == "validation":
        return _validation()
    if name == "convergence":
        return _validation(
            name="convergence",
            description="doubling ladder on the validation set-up",
            cells=(160, 320, 640, 1280, 2560, 5120, 10240),
            snapshots=(),
            mode="ladder",
        )
    if name == "case1":
        return _case("case1", 0.4, 0.5, 0.5, "two classical shocks around a saturated interface")
    if name == "case2":
        return _case("case2", 0.8, 0.5, 0.5, "rarefaction then non-classical and classical shocks")
    if name == "case3":
        return _case("case3", 0.8, 0.4, 0.4, "vehicle runs into a rarefaction")
    if name == "compare_local":
        return _case("compare_local", 0.8, 0.4, 0.4, "non-local against local speed on case3",
                     cells=(40960,), snapshots=(), mode="pair_local")
    if name == "weight_sweep":
        return _case("weight_sweep", 0.8, 0.4, 0.4, "non-local against local speed for mu_1..mu_5",
                     cells=(40960,), weights=(1, 2, 3, 4, 5), snapshots=(), mode="sweep")
    if name == "artifact_probe":
        T = 0.5
        return ExperimentPreset(
            name="artifact_probe",
            description="vehicle starts inside a jam a quarter length behind its head",
            model=min_speed_model(),
            road=(0.0, 1.0),
            initial=PiecewiseConstantProfile.riemann(1.0, 0.0, 0.5),
            y0=0.25,
            T=T,
            weight=3,
            cells=(2560,),
            weights=(3, 4, 5),
            pad_left=CASE_SIGMA * T + CASE_TAIL,
            mode="probe",
            extras={"speed_threshold": 1e-3, "jam_threshold": 1e-3},
        )
    raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
