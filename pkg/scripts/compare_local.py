"""Non-local against local vehicle speed on case3; bus-frame L1 and sup gaps.

    python scripts/compare_local.py [--cells 40960] [--weight 3] [--out DIR]
"""

import argparse

from nlbottleneck.experiments import run_preset
from nlbottleneck.io import write_outputs


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, nargs="+")
    ap.add_argument("--weight", type=int)
    ap.add_argument("--out")
    args = ap.parse_args()
    bundle = run_preset("compare_local", args.cells, args.weight, keep_runs=False)
    for row in bundle.summary["model_gap"]:
        print(f"mu{row['k']}  J={row['cells']}  E1={row['E1']:.4e}  Einf={row['Einf']:.4e}")
    if args.out:
        write_outputs(bundle, args.out)


if __name__ == "__main__":
    main()
