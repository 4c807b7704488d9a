"""Local/non-local gap as the weight support shrinks (mu_1 .. mu_5).

    python scripts/weight_sweep.py [--cells 40960] [--jobs N] [--out DIR]
"""

import argparse

from nlbottleneck.experiments import run_preset
from nlbottleneck.io import write_outputs

PUBLISHED = {1: (6.810e-3, 5.489e-2), 2: (1.105e-3, 1.972e-2), 3: (2.658e-4, 7.759e-3),
             4: (9.232e-5, 2.913e-3), 5: (6.190e-5, 9.110e-4)}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, nargs="+")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out")
    args = ap.parse_args()
    bundle = run_preset("weight_sweep", args.cells, jobs=args.jobs, keep_runs=False)
    print(f"{'k':>3} {'E1':>11} {'ref':>10} {'Einf':>11} {'ref':>10}")
    for row in bundle.summary["model_gap"]:
        e1, einf = PUBLISHED[row["k"]]
        print(f"{row['k']:>3d} {row['E1']:11.4e} {e1:10.3e} {row['Einf']:11.4e} {einf:10.3e}")
    if args.out:
        write_outputs(bundle, args.out)


if __name__ == "__main__":
    main()
