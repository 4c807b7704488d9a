"""TOML run configurations.

A file has the sections ``[model]``, ``[grid]``, ``[initial]``, ``[coupling]``
and ``[output]``.  A top-level ``preset = "<name>"`` loads a preset first;
sections then override its fields.

The mesh is given either as ``dx``/``n_left``/``n_right`` (what :func:`emit_config`
writes), as ``x_min``/``x_max``/``cells`` in the vehicle frame, or as a road
window ``road = [a, b]`` with ``cells`` and optional pads.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

import tomli
import tomli_w

from .model import (
    DomainError,
    PiecewiseConstantProfile,
    WeightProfile,
    model_from_dict,
    parse_weight,
)
from .numflux import FluxKind
from .presets import PRESET_NAMES, get_preset, road_grid
from .solver import COUPLINGS, ConfigError, Grid, RunConfig


class ParseError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


SECTIONS = {
    "model": {"flux", "omega", "Q", "weight"},
    "grid": {"dx", "n_left", "n_right", "x_min", "x_max", "cells", "road", "pad_left", "pad_right",
             "T", "cfl_target", "bulk_flux", "interface_flux"},
    "initial": {"breakpoints", "values", "y0"},
    "coupling": {"mode", "delta", "s", "q"},
    "output": {"snapshots", "store_states", "label"},
}
TOP_LEVEL = {"preset"} | set(SECTIONS)


def _check_keys(data: dict) -> None:
    for key, value in data.items():
        if key not in TOP_LEVEL:
            raise ParseError(key, "unknown key")
        if key in SECTIONS:
            if not isinstance(value, dict):
                raise ParseError(key, "must be a table")
            for sub in value:
                if sub not in SECTIONS[key]:
                    raise ParseError(f"{key}.{sub}", "unknown key")


def _require(section: dict, name: str, key: str) -> Any:
    if key not in section:
        raise ParseError(f"{name}.{key}", "missing required key")
    return section[key]


def _weight(value) -> WeightProfile:
    if isinstance(value, dict) and set(value) == {"k"}:
        return WeightProfile.mu(int(value["k"]))
    return parse_weight(value)


def _grid(g: dict, y0: float, base: Grid | None) -> Grid:
    if {"dx", "n_left", "n_right"} <= g.keys():
        return Grid(float(g["dx"]), int(g["n_left"]), int(g["n_right"]))
    if "road" in g:
        road = tuple(float(v) for v in g["road"])
        return road_grid(road, y0, int(_require(g, "grid", "cells")),
                         float(g.get("pad_left", 0.0)), float(g.get("pad_right", 0.0)))
    if "x_min" in g or "x_max" in g:
        return Grid.from_bounds(float(_require(g, "grid", "x_min")), float(_require(g, "grid", "x_max")),
                                int(_require(g, "grid", "cells")))
    if base is None:
        raise ParseError("grid", "need dx/n_left/n_right, x_min/x_max/cells or road/cells")
    return base


def config_from_dict(data: dict) -> RunConfig:
    """Build a validated :class:`RunConfig` from parsed TOML data."""
    _check_keys(data)
    base: RunConfig | None = None
    preset = None
    if "preset" in data:
        name = data["preset"]
        if name not in PRESET_NAMES:
            raise ParseError("preset", f"unknown preset {name!r}")
        preset = get_preset(name)
    m = data.get("model", {})
    g = data.get("grid", {})
    ini = data.get("initial", {})
    cp = data.get("coupling", {})
    out = data.get("output", {})
    try:
        if preset is not None:
            cells = g.get("cells")
            if cells is not None and not ({"dx", "road", "x_min"} & g.keys()):
                base = preset.config(int(cells))
            else:
                base = preset.config()

        if {"flux", "omega", "Q"} & m.keys():
            fields = dict(base.model.to_dict()) if base else {}
            fields.update({k: m[k] for k in ("flux", "omega", "Q") if k in m})
            for k in ("flux", "omega", "Q"):
                _require(fields, "model", k)
            model = model_from_dict(fields)
        elif base is not None:
            model = base.model
        else:
            raise ParseError("model.flux", "missing required key")

        if "weight" in m:
            weight = _weight(m["weight"])
        elif base is not None:
            weight = base.weight
        else:
            raise ParseError("model.weight", "missing required key")

        if "breakpoints" in ini or "values" in ini:
            initial = PiecewiseConstantProfile(
                tuple(float(v) for v in _require(ini, "initial", "breakpoints")),
                tuple(float(v) for v in _require(ini, "initial", "values")),
            )
        elif base is not None:
            initial = base.initial
        else:
            raise ParseError("initial.values", "missing required key")
        y0 = float(ini["y0"]) if "y0" in ini else (base.y0 if base else _require(ini, "initial", "y0"))

        grid = _grid(g, y0, base.grid if base else None)
        T = float(g["T"]) if "T" in g else (base.T if base else _require(g, "grid", "T"))

        mode = cp.get("mode", base.coupling if base else "nonlocal")
        if mode not in COUPLINGS:
            raise ParseError("coupling.mode", f"must be one of {COUPLINGS}")
        frozen = None
        if mode == "frozen":
            frozen = (float(_require(cp, "coupling", "s")), float(_require(cp, "coupling", "q")))
        delta = float(cp["delta"]) if "delta" in cp else None
        if mode == "splitting" and delta is None:
            raise ParseError("coupling.delta", "required for splitting")

        snapshots = out.get("snapshots")
        snapshots = tuple(float(t) for t in snapshots) if snapshots is not None else (
            base.snapshots if base else ())
        return RunConfig(
            grid=grid,
            model=model,
            weight=weight,
            initial=initial,
            y0=y0,
            T=T,
            cfl_target=float(g.get("cfl_target", base.cfl_target if base else 0.5)),
            bulk_flux=FluxKind(g.get("bulk_flux", base.bulk_flux if base else FluxKind.RUSANOV_LOCAL)),
            interface_flux=FluxKind(g.get("interface_flux", base.interface_flux if base else FluxKind.GODUNOV)),
            coupling=mode,
            delta=delta,
            frozen=frozen,
            snapshots=snapshots,
            store_states=bool(out.get("store_states", False)),
            label=str(out.get("label", base.label if base else "")),
        )
    except ParseError:
        raise
    except (ConfigError, DomainError, ValueError, KeyError, TypeError) as exc:
        raise ParseError(_guess_key(str(exc)), str(exc)) from exc


def _guess_key(message: str) -> str:
    for section, keys in SECTIONS.items():
        for key in keys:
            if message.startswith(key) or f" {key}=" in message or message.startswith(f"{key}="):
                return f"{section}.{key}"
    return "config"


def parse_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ParseError(str(path), f"invalid TOML: {exc}") from exc
    return config_from_dict(data)


def config_to_dict(cfg: RunConfig) -> dict:
    """Fully resolved configuration in the file layout (no preset reference)."""
    model = cfg.model.to_dict()
    coupling: dict[str, Any] = {"mode": cfg.coupling}
    if cfg.delta is not None:
        coupling["delta"] = cfg.delta
    if cfg.frozen is not None:
        coupling["s"], coupling["q"] = float(cfg.frozen[0]), float(cfg.frozen[1])
    return {
        "model": {
            "flux": model["flux"],
            "omega": model["omega"],
            "Q": model["Q"],
            "weight": cfg.weight.to_dict(),
        },
        "grid": {
            "dx": cfg.grid.dx,
            "n_left": cfg.grid.n_left,
            "n_right": cfg.grid.n_right,
            "T": cfg.T,
            "cfl_target": cfg.cfl_target,
            "bulk_flux": cfg.bulk_flux.value,
            "interface_flux": cfg.interface_flux.value,
        },
        "initial": {
            "breakpoints": list(cfg.initial.breakpoints),
            "values": list(cfg.initial.values),
            "y0": cfg.y0,
        },
        "coupling": coupling,
        "output": {
            "snapshots": list(cfg.snapshots),
            "store_states": cfg.store_states,
            "label": cfg.label,
        },
    }


def emit_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(config_to_dict(cfg))


def write_config(cfg: RunConfig, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(emit_config(cfg), encoding="utf-8", newline="\n")
    return path
