"""CSV/JSON emission with exact float round-trips."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .config import emit_config
from .solver import Trajectory

TRAJECTORY_COLUMNS = ("t", "y", "s", "xi", "q", "interface_flux", "constraint_active")
SNAPSHOT_COLUMNS = ("x_center", "rho", "x_road")


class OutputError(OSError):
    pass


def fmt(x: float) -> str:
    """17 significant digits; parses back to the identical double."""
    return format(float(x), ".17g")


def _write_text(path: Path, text: str) -> None:
    try:
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def trajectory_csv(tr: Trajectory | None) -> str:
    lines = [",".join(TRAJECTORY_COLUMNS)]
    if tr is not None:
        cols = (tr.t, tr.y, tr.s, tr.xi, tr.q, tr.interface_flux)
        for n in range(len(tr.t)):
            row = [fmt(c[n]) for c in cols]
            row.append("1" if tr.constraint_active[n] else "0")
            lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def snapshot_csv(tr: Trajectory, t_actual: float, rho: np.ndarray) -> str:
    x = tr.config.grid.centers
    y = float(np.interp(t_actual, tr.t, tr.y))
    lines = [",".join(SNAPSHOT_COLUMNS)]
    lines.extend(f"{fmt(xc)},{fmt(r)},{fmt(xc + y)}" for xc, r in zip(x, rho))
    return "\n".join(lines) + "\n"


def read_trajectory_csv(path: str | Path) -> dict[str, np.ndarray]:
    """Parse a trajectory CSV back into arrays."""
    text = Path(path).read_text(encoding="utf-8").splitlines()
    header = text[0].split(",")
    if tuple(header) != TRAJECTORY_COLUMNS:
        raise ValueError(f"unexpected header {header}")
    rows = [line.split(",") for line in text[1:] if line]
    out = {}
    for i, name in enumerate(header):
        vals = [r[i] for r in rows]
        out[name] = np.array([v == "1" for v in vals]) if name == "constraint_active" else np.array(
            [float(v) for v in vals])
    return out


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, arrays become lists."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _snap_name(label: str, t_req: float) -> str:
    # shortest round-trip form keeps names readable (0.7245, not 0.72450000000000003)
    return f"{label}_snapshot_t{float(t_req)!r}.csv"


def run_label(cfg, index: int) -> str:
    label = cfg.label or f"run{index}"
    return label if cfg.coupling == "nonlocal" else f"{label}-{cfg.coupling}"


def write_outputs(bundle, out_dir: str | Path) -> list[Path]:
    """Write configs, trajectories, snapshots, ``summary.json`` and ``timing.json``.

    Everything except ``timing.json`` depends only on the configuration.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create {out}: {exc}") from exc
    paths: list[Path] = []
    for i, cfg in enumerate(bundle.configs):
        p = out / f"{run_label(cfg, i)}.toml"
        _write_text(p, emit_config(cfg))
        paths.append(p)
    for i, tr in enumerate(bundle.runs):
        label = run_label(tr.config, i)
        p = out / f"{label}_trajectory.csv"
        _write_text(p, trajectory_csv(tr))
        paths.append(p)
        for t_req, (t_act, rho) in sorted(tr.snapshots.items()):
            p = out / _snap_name(label, t_req)
            _write_text(p, snapshot_csv(tr, t_act, rho))
            paths.append(p)
    p = out / "summary.json"
    _write_text(p, dumps(bundle.summary))
    paths.append(p)
    p = out / "timing.json"
    _write_text(p, dumps(bundle.timing))
    paths.append(p)
    return paths
