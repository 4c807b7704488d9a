"""Continuous model data: fundamental diagram, vehicle speed law, constraint law, weights.

The flux in the frame of the slow vehicle is ``F(s, rho) = f(rho) - s * rho``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class DomainError(ValueError):
    """An argument lies outside the domain where a law is defined."""


class InfeasibleConstraintError(ValueError):
    """The constraint level exceeds the maximal flux."""


class CalibrationError(ValueError):
    pass


ROOT_TOL = 1e-12
ROOT_MAXITER = 200
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _check_range(name: str, value, lo: float, hi: float, slack: float = 1e-12) -> None:
    arr = np.asarray(value, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < lo - slack) or np.any(arr > hi + slack):
        raise DomainError(f"{name}={value!r} outside [{lo}, {hi}]")


# --------------------------------------------------------------------------
# fundamental diagrams
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadraticFlux:
    """Greenshields diagram ``f(rho) = vmax * rho * (1 - rho / R)``."""

    R: float = 1.0
    vmax: float = 1.0

    def __post_init__(self):
        if not (self.R > 0 and self.vmax > 0):
            raise DomainError("quadratic flux needs R > 0 and vmax > 0")

    def f(self, rho):
        return self.vmax * rho * (1.0 - rho / self.R)

    def df(self, rho):
        return self.vmax * (1.0 - 2.0 * rho / self.R)

    @property
    def df_sup(self) -> float:
        return self.vmax

    @property
    def concavity(self) -> float:
        """alpha such that f'' <= -alpha."""
        return 2.0 * self.vmax / self.R

    def to_dict(self) -> dict:
        return {"kind": "quadratic", "R": self.R, "vmax": self.vmax}


@dataclass(frozen=True)
class TabulatedFlux:
    """Piecewise-linear concave diagram through ``(rho_i, f_i)``.

    Nodes must start at ``(0, 0)`` and end at ``(R, 0)``.
    """

    rho: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        r = np.asarray(self.rho, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if r.ndim != 1 or r.shape != v.shape or r.size < 3:
            raise DomainError("tabulated flux needs >= 3 matching nodes")
        if r[0] != 0.0 or v[0] != 0.0 or v[-1] != 0.0 or np.any(np.diff(r) <= 0):
            raise DomainError("tabulated flux nodes must go from (0,0) to (R,0) increasingly")
        slopes = np.diff(v) / np.diff(r)
        if np.any(np.diff(slopes) >= 0):
            raise DomainError("tabulated flux must be strictly concave")

    @property
    def R(self) -> float:
        return float(self.rho[-1])

    def f(self, rho):
        return np.interp(rho, self.rho, self.values)

    def df(self, rho):
        r = np.asarray(self.rho)
        slopes = np.diff(self.values) / np.diff(r)
        idx = np.clip(np.searchsorted(r, rho, side="right") - 1, 0, slopes.size - 1)
        return slopes[idx]

    @property
    def df_sup(self) -> float:
        slopes = np.diff(self.values) / np.diff(self.rho)
        return float(np.max(np.abs(slopes)))

    @property
    def concavity(self) -> float:
        return 0.0

    def to_dict(self) -> dict:
        return {"kind": "tabulated", "rho": list(self.rho), "values": list(self.values)}


# --------------------------------------------------------------------------
# speed laws
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MinSpeed:
    """``omega(rho) = min(v_bus, 1 - rho)``."""

    v_bus: float

    def __call__(self, rho):
        return np.minimum(self.v_bus, 1.0 - rho)

    @property
    def sup(self) -> float:
        return self.v_bus

    def to_dict(self) -> dict:
        return {"kind": "min", "v_bus": self.v_bus}


@dataclass(frozen=True)
class RationalThenLinear:
    """``alpha / (beta + rho)**2`` on ``[0, rho_star]``, ``1 - rho`` beyond."""

    alpha: float
    beta: float
    rho_star: float

    @classmethod
    def calibrated(cls, v0: float, v1: float, rho_star: float) -> "RationalThenLinear":
        alpha, beta = calibrate_rational_omega(v0, v1, rho_star)
        return cls(alpha, beta, rho_star)

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=float)
        out = np.where(rho <= self.rho_star, self.alpha / (self.beta + rho) ** 2, 1.0 - rho)
        return out if out.ndim else float(out)

    @property
    def sup(self) -> float:
        return self.alpha / self.beta**2

    def to_dict(self) -> dict:
        return {
            "kind": "rational_then_linear",
            "alpha": self.alpha,
            "beta": self.beta,
            "rho_star": self.rho_star,
        }


@dataclass(frozen=True)
class TabulatedSpeed:
    """Piecewise-linear nonincreasing speed law."""

    rho: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if np.any(np.diff(v) > 0) or np.any(v < 0) or np.any(np.diff(self.rho) <= 0):
            raise DomainError("tabulated speed must be nonnegative and nonincreasing")

    def __call__(self, rho):
        return np.interp(rho, self.rho, self.values)

    @property
    def sup(self) -> float:
        return float(self.values[0])

    def to_dict(self) -> dict:
        return {"kind": "tabulated", "rho": list(self.rho), "values": list(self.values)}


def calibrate_rational_omega(v0: float, v1: float, rho_star: float) -> tuple[float, float]:
    """Return ``(alpha, beta)`` with ``alpha/beta**2 = v0`` and ``alpha/(beta+rho_star)**2 = v1``.

    Continuity with the linear branch requires ``v1 = 1 - rho_star``.
    """
    if not (0 < v1 < v0):
        raise CalibrationError(f"need 0 < v1 < v0, got v0={v0}, v1={v1}")
    if not 0 < rho_star < 1:
        raise CalibrationError(f"rho_star={rho_star} must lie in (0, 1)")
    if abs(v1 - (1.0 - rho_star)) > 1e-12:
        raise CalibrationError(f"v1={v1} is not continuous with 1 - rho at rho_star={rho_star}")
    beta = rho_star / (math.sqrt(v0 / v1) - 1.0)
    return v0 * beta**2, beta


# --------------------------------------------------------------------------
# constraint laws
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadraticConstraint:
    """``Q(s) = c * ((1 - s) / 2)**2``."""

    c: float

    def __post_init__(self):
        if not 0 < self.c < 1:
            raise DomainError(f"constraint coefficient {self.c} must lie in (0, 1)")

    def __call__(self, s):
        return self.c * ((1.0 - s) / 2.0) ** 2

    def to_dict(self) -> dict:
        return {"kind": "quadratic", "c": self.c}


@dataclass(frozen=True)
class NoConstraint:
    def __call__(self, s):
        return math.inf if np.ndim(s) == 0 else np.full(np.shape(s), np.inf)

    def to_dict(self) -> dict:
        return {"kind": "none"}


@dataclass(frozen=True)
class CallableConstraint:
    fn: Callable[[float], float]
    label: str = "callable"

    def __call__(self, s):
        return self.fn(s)

    def to_dict(self) -> dict:
        return {"kind": self.label}


# --------------------------------------------------------------------------
# full model
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FluxModel:
    flux: QuadraticFlux | TabulatedFlux
    omega: MinSpeed | RationalThenLinear | TabulatedSpeed
    Q: QuadraticConstraint | NoConstraint | CallableConstraint

    def __post_init__(self):
        # argmax_rho F(s, .) must stay in (0, R) for every admissible speed
        if self.flux.df(0.0) - self.Sigma <= 0:
            raise DomainError(
                f"Sigma={self.Sigma} too large: F(Sigma, .) is not bell-shaped"
            )

    @property
    def R(self) -> float:
        return self.flux.R

    @property
    def Sigma(self) -> float:
        return float(self.omega.sup)

    @property
    def is_quadratic(self) -> bool:
        return isinstance(self.flux, QuadraticFlux)

    def F(self, s, rho):
        """Unchecked flux evaluation; used in the hot loop."""
        return self.flux.f(rho) - s * rho

    def dF(self, s, rho):
        return self.flux.df(rho) - s

    def to_dict(self) -> dict:
        return {
            "flux": self.flux.to_dict(),
            "omega": self.omega.to_dict(),
            "Q": self.Q.to_dict(),
        }


def eval_flux(model: FluxModel, s, rho):
    """``F(s, rho) = f(rho) - s*rho`` with domain checks."""
    _check_range("s", s, 0.0, model.Sigma)
    _check_range("rho", rho, 0.0, model.R)
    return model.F(s, rho)


def critical_density(model: FluxModel, s: float) -> float:
    """Unique maximiser of ``F(s, .)`` on ``[0, R]``."""
    _check_range("s", s, 0.0, model.Sigma)
    fl = model.flux
    if isinstance(fl, QuadraticFlux):
        return 0.5 * fl.R * (1.0 - s / fl.vmax)
    a, b = 0.0, model.R
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = model.F(s, c), model.F(s, d)
    while b - a > ROOT_TOL:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = model.F(s, c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = model.F(s, d)
    return 0.5 * (a + b)


def max_flux(model: FluxModel, s: float) -> float:
    return float(model.F(s, critical_density(model, s)))


def _bisect(g: Callable[[float], float], lo: float, hi: float) -> float:
    """Root of ``g`` on [lo, hi] given ``g(lo) <= 0 <= g(hi)``."""
    for _ in range(ROOT_MAXITER):
        if hi - lo <= ROOT_TOL:
            break
        mid = 0.5 * (lo + hi)
        if g(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def constraint_roots(model: FluxModel, s: float, q: float) -> tuple[float, float]:
    """Return ``(rho_check, rho_hat)`` with ``F(s, .) = q`` and ``rho_check <= rho_hat``."""
    if q < 0:
        raise DomainError(f"q={q} must be nonnegative")
    rbar = critical_density(model, s)
    fmax = float(model.F(s, rbar))
    if q > fmax + 1e-15:
        raise InfeasibleConstraintError(f"q={q} exceeds max flux {fmax} at s={s}")
    q = min(q, fmax)
    fl = model.flux
    if isinstance(fl, QuadraticFlux):
        # F(s, rho) = fmax - vmax/R * (rho - rbar)**2
        half = math.sqrt((fmax - q) * fl.R / fl.vmax)
        return max(rbar - half, 0.0), min(rbar + half, fl.R)
    check = _bisect(lambda r: model.F(s, r) - q, 0.0, rbar)
    if model.F(s, model.R) >= q:
        return check, model.R
    hat = _bisect(lambda r: q - model.F(s, r), rbar, model.R)
    return check, hat


@dataclass(frozen=True)
class ConstraintGap:
    epsilon: float
    s_argmin: float

    @property
    def satisfied(self) -> bool:
        return self.epsilon > 0


def constraint_gap(model: FluxModel, samples: int = 1001) -> ConstraintGap:
    """Minimum over sampled speeds of ``max_rho F(s, rho) - Q(s)``."""
    s_values = np.linspace(0.0, model.Sigma, samples)
    gaps = np.array([max_flux(model, s) - model.Q(s) for s in s_values])
    k = int(np.argmin(gaps))
    return ConstraintGap(float(gaps[k]), float(s_values[k]))


# --------------------------------------------------------------------------
# piecewise-constant profiles
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PiecewiseConstantProfile:
    """Piecewise-constant function on the real line.

    ``breakpoints`` has one entry fewer than ``values``; the first value holds on
    ``(-inf, breakpoints[0])`` and the last on ``(breakpoints[-1], inf)``.
    """

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(self.breakpoints) + 1:
            raise ValueError("need len(values) == len(breakpoints) + 1")
        if any(b >= a for a, b in zip(self.breakpoints[1:], self.breakpoints[:-1])):
            raise ValueError("breakpoints must be strictly increasing")

    @classmethod
    def riemann(cls, left: float, right: float, at: float) -> "PiecewiseConstantProfile":
        return cls((at,), (left, right))

    @classmethod
    def indicator(cls, value: float, a: float, b: float) -> "PiecewiseConstantProfile":
        return cls((a, b), (0.0, value, 0.0))

    def shifted(self, dx: float) -> "PiecewiseConstantProfile":
        """Profile ``x -> self(x + dx)``."""
        return PiecewiseConstantProfile(tuple(b - dx for b in self.breakpoints), self.values)

    def check_range(self, R: float) -> None:
        _check_range("profile value", np.asarray(self.values), 0.0, R, slack=0.0)

    def __call__(self, x):
        idx = np.searchsorted(self.breakpoints, x, side="right")
        return np.asarray(self.values)[idx]

    def cell_averages(self, edges: np.ndarray) -> np.ndarray:
        """Exact means over the cells ``[edges[i], edges[i+1]]``.

        Cells inside one piece get that value bitwise; cut cells are clipped to
        the range of the values so rounding cannot leave it.
        """
        edges = np.asarray(edges, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        means = np.diff(self.antiderivative(edges)) / np.diff(edges)
        np.clip(means, vals.min(), vals.max(), out=means)
        first = np.searchsorted(self.breakpoints, edges[:-1], side="right")
        last = np.searchsorted(self.breakpoints, edges[1:], side="left")
        whole = first == last
        means[whole] = vals[first[whole]]
        return means

    def antiderivative(self, x: np.ndarray) -> np.ndarray:
        """Integral from a point left of all breakpoints; only differences are meaningful."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        bps = self.breakpoints
        vals = self.values
        ref = min(x.min(), bps[0] if bps else 0.0)
        lo = ref
        for b, v in zip(list(bps) + [math.inf], vals):
            seg_hi = np.minimum(x, b)
            out += v * np.clip(seg_hi - lo, 0.0, None)
            lo = max(lo, b)
        return out

    def to_dict(self) -> dict:
        return {"breakpoints": list(self.breakpoints), "values": list(self.values)}


@dataclass(frozen=True)
class WeightProfile:
    """Nonnegative piecewise-constant weight with compact support."""

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]
    k: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.values) != len(self.breakpoints) - 1 or len(self.values) < 1:
            raise ValueError("weight needs n+1 breakpoints for n values")
        if any(v < 0 for v in self.values):
            raise DomainError("weight must be nonnegative")
        if any(b >= a for a, b in zip(self.breakpoints[1:], self.breakpoints[:-1])):
            raise ValueError("breakpoints must be strictly increasing")

    @classmethod
    def mu(cls, k: int) -> "WeightProfile":
        """``2**k`` times the indicator of ``[0, 2**-k]``."""
        return cls((0.0, 2.0**-k), (2.0**k,), k=k)

    @property
    def support(self) -> tuple[float, float]:
        return self.breakpoints[0], self.breakpoints[-1]

    @property
    def mass(self) -> float:
        return float(np.sum(np.diff(self.breakpoints) * np.asarray(self.values)))

    @property
    def total_variation(self) -> float:
        padded = np.concatenate([[0.0], self.values, [0.0]])
        return float(np.sum(np.abs(np.diff(padded))))

    def as_profile(self) -> PiecewiseConstantProfile:
        return PiecewiseConstantProfile(tuple(self.breakpoints), (0.0, *self.values, 0.0))

    def to_dict(self) -> dict:
        if self.k is not None:
            return {"k": self.k}
        return {"breakpoints": list(self.breakpoints), "values": list(self.values)}


def discretize_weight(mu: WeightProfile, edges: np.ndarray) -> np.ndarray:
    """Cell means of ``mu`` on the mesh given by ``edges``."""
    edges = np.asarray(edges, dtype=float)
    lo, hi = mu.support
    if lo < edges[0] or hi > edges[-1]:
        raise DomainError(f"weight support [{lo}, {hi}] exceeds mesh [{edges[0]}, {edges[-1]}]")
    return mu.as_profile().cell_averages(edges)


def parse_weight(value) -> WeightProfile:
    """Accept ``"mu4"``, ``4`` or a dict with ``k`` or breakpoints/values."""
    if isinstance(value, WeightProfile):
        return value
    if isinstance(value, int):
        return WeightProfile.mu(value)
    if isinstance(value, str):
        if value.startswith("mu") and value[2:].isdigit():
            return WeightProfile.mu(int(value[2:]))
        raise ValueError(f"unknown weight {value!r}")
    if "k" in value:
        return WeightProfile.mu(int(value["k"]))
    return WeightProfile(tuple(value["breakpoints"]), tuple(value["values"]))


def model_from_dict(d: dict) -> FluxModel:
    fd = d["flux"]
    if fd["kind"] == "quadratic":
        flux = QuadraticFlux(R=fd.get("R", 1.0), vmax=fd.get("vmax", 1.0))
    elif fd["kind"] == "tabulated":
        flux = TabulatedFlux(tuple(fd["rho"]), tuple(fd["values"]))
    else:
        raise ValueError(f"unknown flux kind {fd['kind']!r}")
    od = d["omega"]
    if od["kind"] == "min":
        omega = MinSpeed(od["v_bus"])
    elif od["kind"] == "rational_then_linear":
        if "alpha" in od:
            omega = RationalThenLinear(od["alpha"], od["beta"], od["rho_star"])
        else:
            omega = RationalThenLinear.calibrated(od["v0"], od["v1"], od["rho_star"])
    elif od["kind"] == "tabulated":
        omega = TabulatedSpeed(tuple(od["rho"]), tuple(od["values"]))
    else:
        raise ValueError(f"unknown omega kind {od['kind']!r}")
    qd = d["Q"]
    if qd["kind"] == "quadratic":
        Q = QuadraticConstraint(qd["c"])
    elif qd["kind"] == "none":
        Q = NoConstraint()
    else:
        raise ValueError(f"unknown constraint kind {qd['kind']!r}")
    return FluxModel(flux, omega, Q)


def profile_from_dict(d: dict) -> PiecewiseConstantProfile:
    return PiecewiseConstantProfile(tuple(d["breakpoints"]), tuple(d["values"]))
