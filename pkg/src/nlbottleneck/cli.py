"""Command line entry point.

    nlbottleneck run --config FILE [--out DIR]
    nlbottleneck preset NAME [--cells N ...] [--weight muK] [--out DIR] [--jobs N]
    nlbottleneck check --config FILE

The default output directory is taken from ``NLBOTTLENECK_OUT`` (else ``results``).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import ParseError, parse_config
from .experiments import check_config, run_config, run_preset
from .io import write_outputs
from .presets import PRESET_NAMES

OUT_ENV = "NLBOTTLENECK_OUT"
log = logging.getLogger("nlbottleneck")


def default_out(name: str) -> Path:
    return Path(os.environ.get(OUT_ENV, "results")) / name


def _weight(text: str) -> int:
    t = text.strip().lower()
    if t.startswith("mu"):
        t = t[2:]
    try:
        k = int(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"weight must look like mu3 or 3, got {text!r}") from None
    if k < 0:
        raise argparse.ArgumentTypeError("weight index must be nonnegative")
    return k


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nlbottleneck", description=__doc__.splitlines()[0] if __doc__ else None)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one configuration file")
    r.add_argument("--config", required=True, type=Path)
    r.add_argument("--out", type=Path)

    p = sub.add_parser("preset", help="run a named experiment")
    p.add_argument("name", choices=PRESET_NAMES)
    p.add_argument("--cells", type=int, nargs="+")
    p.add_argument("--weight", type=_weight)
    p.add_argument("--out", type=Path)
    p.add_argument("--jobs", type=int, default=1)

    c = sub.add_parser("check", help="run the invariant suite on one configuration")
    c.add_argument("--config", required=True, type=Path)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "run":
            cfg = parse_config(args.config)
            bundle = run_config(cfg)
            out = args.out or default_out(cfg.label or args.config.stem)
            paths = write_outputs(bundle, out)
            print(f"wrote {len(paths)} files to {out}")
            return 0
        if args.command == "preset":
            bundle = run_preset(args.name, args.cells, args.weight, jobs=max(1, args.jobs))
            out = args.out or default_out(args.name)
            paths = write_outputs(bundle, out)
            _print_preset(bundle)
            print(f"wrote {len(paths)} files to {out}")
            return 0
        cfg = parse_config(args.config)
        reports = check_config(cfg)
        for rep in reports:
            print(rep.line())
        return 0 if all(r.passed for r in reports) else 1
    except ParseError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


def _print_preset(bundle) -> None:
    s = bundle.summary
    for row in s.get("refinement", []):
        print(f"{row['cells']:>7d}  E_rho={row['E_rho']:.5e}  E_y={row['E_y']:.5e}")
    if "orders" in s:
        print(f"orders: rho {s['orders']['rho']:.3f}  y {s['orders']['y']:.3f}")
    for row in s.get("model_gap", []):
        print(f"mu{row['k']}  J={row['cells']}  E1={row['E1']:.4e}  Einf={row['Einf']:.4e}")
    for row in s.get("artifact", []):
        print(f"mu{row['k']}  duration={row['duration']:.5f}")
    for res in s.get("runs", []):
        r = res["run"]
        print(f"{r['label']}: y(T)={r['y_final']:.6f} s in [{r['s_min']:.4f}, {r['s_max']:.4f}]")
        for d in res["diagnostics"]:
            status = "n/a" if not d["applicable"] else ("pass" if d["passed"] else "FAIL")
            print(f"  {d['name']}: {status} (worst margin {d['worst_margin']:.3e})")


if __name__ == "__main__":
    raise SystemExit(main())
