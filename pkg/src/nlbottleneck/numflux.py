"""Two-point monotone numerical fluxes for ``rho -> F(s, rho)``."""

from __future__ import annotations

import enum

import numpy as np

from .model import DomainError, FluxModel, _check_range, critical_density


class FluxKind(str, enum.Enum):
    GODUNOV = "godunov"
    RUSANOV = "rusanov"
    ENGQUIST_OSHER = "engquist_osher"
    RUSANOV_LOCAL = "rusanov_local"


def _check(model: FluxModel, s, a, b) -> None:
    _check_range("s", s, 0.0, model.Sigma)
    _check_range("a", a, 0.0, model.R)
    _check_range("b", b, 0.0, model.R)


def rusanov_constant(model: FluxModel, s: float) -> float:
    """Global bound on ``|d/drho F(s, .)|``: ``sup|f'| + s``."""
    return model.flux.df_sup + s


def godunov_raw(model, s, a, b, rbar):
    # demand/supply form; exact for bell-shaped F
    demand = model.F(s, np.minimum(a, rbar))
    supply = model.F(s, np.maximum(b, rbar))
    return np.minimum(demand, supply)


def rusanov_raw(model, s, a, b, C):
    return 0.5 * (model.F(s, a) + model.F(s, b)) - 0.5 * C * (b - a)


def local_speed(model, s, a, b):
    """``max(|dF/drho(a)|, |dF/drho(b)|)``; equals the max over ``[a, b]`` for concave ``f``."""
    return np.maximum(np.abs(model.dF(s, a)), np.abs(model.dF(s, b)))


def rusanov_local_raw(model, s, a, b):
    return 0.5 * (model.F(s, a) + model.F(s, b)) - 0.5 * local_speed(model, s, a, b) * (b - a)


def engquist_osher_raw(model, s, a, b, rbar):
    return model.F(s, np.minimum(a, rbar)) + model.F(s, np.maximum(b, rbar)) - model.F(s, rbar)


def godunov(model: FluxModel, s: float, a, b):
    """min of F over [a, b] if a <= b, max over [b, a] otherwise."""
    _check(model, s, a, b)
    return godunov_raw(model, s, a, b, critical_density(model, s))


def rusanov(model: FluxModel, s: float, a, b):
    _check(model, s, a, b)
    return rusanov_raw(model, s, a, b, rusanov_constant(model, s))


def rusanov_local(model: FluxModel, s: float, a, b):
    """Rusanov flux with the diffusion constant taken from the two states."""
    _check(model, s, a, b)
    return rusanov_local_raw(model, s, a, b)


def engquist_osher(model: FluxModel, s: float, a, b):
    _check(model, s, a, b)
    return engquist_osher_raw(model, s, a, b, critical_density(model, s))


def numerical_flux(kind: FluxKind | str, model: FluxModel, s: float, a, b):
    kind = FluxKind(kind)
    if kind is FluxKind.GODUNOV:
        return godunov(model, s, a, b)
    if kind is FluxKind.RUSANOV:
        return rusanov(model, s, a, b)
    if kind is FluxKind.RUSANOV_LOCAL:
        return rusanov_local(model, s, a, b)
    return engquist_osher(model, s, a, b)


def interface_flux(base: FluxKind | str, model: FluxModel, s: float, q: float, a, b):
    """Constrained flux ``min(base(a, b), q)`` used at the vehicle position."""
    if not q >= 0:
        raise DomainError(f"constraint level q={q} must be nonnegative")
    return np.minimum(numerical_flux(base, model, s, a, b), q)


class FluxEvaluator:
    """Fast unchecked evaluation of one flux kind at a frozen speed.

    Precomputes the critical density and the Rusanov constant once per step.
    """

    __slots__ = ("kind", "model", "s", "rbar", "C")

    def __init__(self, kind: FluxKind | str, model: FluxModel, s: float):
        self.kind = FluxKind(kind)
        self.model = model
        self.s = s
        self.rbar = critical_density(model, s)
        self.C = rusanov_constant(model, s)

    def __call__(self, a, b):
        if self.kind is FluxKind.RUSANOV:
            return rusanov_raw(self.model, self.s, a, b, self.C)
        if self.kind is FluxKind.RUSANOV_LOCAL:
            return rusanov_local_raw(self.model, self.s, a, b)
        if self.kind is FluxKind.GODUNOV:
            return godunov_raw(self.model, self.s, a, b, self.rbar)
        return engquist_osher_raw(self.model, self.s, a, b, self.rbar)


# largest admissible lambda*L per bulk flux
MAX_CFL = {
    FluxKind.GODUNOV: 1.0,
    FluxKind.RUSANOV: 1.0,
    FluxKind.ENGQUIST_OSHER: 1.0,
    FluxKind.RUSANOV_LOCAL: 0.5,
}


def cfl_constant(model: FluxModel, kind: FluxKind | str = FluxKind.RUSANOV) -> float:
    """``L`` such that ``lambda * L <= 1`` keeps the scheme monotone.

    For Godunov and Rusanov (and Engquist-Osher, whose partial derivatives obey
    the same bound) this is ``2 (sup|f'| + Sigma)``.  The local Rusanov flux
    has partial derivatives up to twice as large, so it needs ``lambda*L <= 1/2``
    (see :data:`MAX_CFL`).
    """
    FluxKind(kind)
    return 2.0 * (model.flux.df_sup + model.Sigma)
