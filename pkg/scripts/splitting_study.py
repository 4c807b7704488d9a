"""Splitting with windows T/2^m against the fully coupled run.

    python scripts/splitting_study.py [--preset case3] [--cells 1280] [--mmax 6]
"""

import argparse

from nlbottleneck.experiments import splitting_distances
from nlbottleneck.presets import get_preset


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="case3")
    ap.add_argument("--cells", type=int, default=1280)
    ap.add_argument("--mmax", type=int, default=6)
    args = ap.parse_args()
    cfg = get_preset(args.preset).config(args.cells)
    print(f"{'m':>2} {'delta':>10} {'L1(T)':>11} {'L1 in time':>11} {'max |dy|':>11}")
    for row in splitting_distances(cfg, range(1, args.mmax + 1)):
        print(f"{row['m']:>2d} {row['delta']:10.5f} {row['L1_final']:11.4e} "
              f"{row['L1_time']:11.4e} {row['y_gap']:11.4e}")


if __name__ == "__main__":
    main()
