"""Doubling ladder on the validation set-up: error table and fitted orders.

    python scripts/run_convergence.py [--cells 160 320 ...] [--out results/convergence]
"""

import argparse

from nlbottleneck.experiments import run_preset
from nlbottleneck.io import write_outputs

# reference magnitudes for the same ladder (E_rho, E_y)
PUBLISHED = {
    160: (0.24053, 0.0480643),
    320: (0.15731, 0.015939),
    640: (0.09647, 0.007698),
    1280: (0.06197, 0.003715),
    2560: (0.03226, 0.001777),
    5120: (0.01936, 0.000889),
    10240: (0.01055, 0.000443),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, nargs="+")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out")
    args = ap.parse_args()
    bundle = run_preset("convergence", args.cells, jobs=args.jobs, keep_runs=False)
    print(f"{'cells':>7} {'E_rho':>12} {'ratio':>6} {'E_y':>12} {'ratio':>6}")
    for row in bundle.summary["refinement"]:
        ref = PUBLISHED.get(row["cells"])
        r1 = f"{row['E_rho'] / ref[0]:6.2f}" if ref else "     -"
        r2 = f"{row['E_y'] / ref[1]:6.2f}" if ref else "     -"
        print(f"{row['cells']:>7d} {row['E_rho']:12.5e} {r1} {row['E_y']:12.5e} {r2}")
    if "orders" in bundle.summary:
        o = bundle.summary["orders"]
        print(f"fitted orders: rho {o['rho']:.3f}, y {o['y']:.3f}")
    if args.out:
        write_outputs(bundle, args.out)


if __name__ == "__main__":
    main()
