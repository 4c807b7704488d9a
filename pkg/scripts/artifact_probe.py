"""How long the vehicle creeps forward while the cell ahead is still jammed.

    python scripts/artifact_probe.py [--cells 2560]
"""

import argparse

from nlbottleneck.experiments import run_preset


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, nargs="+")
    args = ap.parse_args()
    bundle = run_preset("artifact_probe", args.cells)
    for row in bundle.summary["artifact"]:
        print(f"mu{row['k']}  support={row['support']:.5f}  duration={row['duration']:.5f}  "
              f"window=[{row['window_start']:.4f}, {row['window_end']:.4f}]")
    print("decreasing in k:", bundle.summary["durations_decreasing"])


if __name__ == "__main__":
    main()
