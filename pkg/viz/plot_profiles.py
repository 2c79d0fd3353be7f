#!/usr/bin/env python3
"""Time-series profile plots from a trajectory CSV.

Usage:
  plot_profiles.py trajectory.csv -o profiles.png [--kind inputs|velocity]

`inputs` plots the four rotor thrusts; `velocity` plots the velocity
components and the speed magnitude.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

sys.path.insert(0, str(Path(__file__).resolve().parent))
import vizio


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("trajectory", help="trajectory CSV (fixed 18-column schema)")
    ap.add_argument("-o", "--output", required=True, help="output image path")
    ap.add_argument("--kind", choices=["inputs", "velocity"], default="velocity")
    args = ap.parse_args(argv)

    try:
        data = vizio.load_trajectory(args.trajectory)
    except (OSError, ValueError, vizio.SchemaError) as err:
        vizio.fail(str(err))

    t = data["t"]
    fig, ax = plt.subplots(figsize=(8, 4))
    if args.kind == "inputs":
        missing = [c for c in ("T1", "T2", "T3", "T4") if c not in data.dtype.names]
        if missing:
            vizio.fail(f"{args.trajectory}: missing input columns {missing}")
        for i in range(1, 5):
            ax.step(t, data[f"T{i}"], where="post", label=f"$T_{i}$")
        ax.set_ylabel("rotor thrust [N]")
    else:
        for comp in ("vx", "vy", "vz"):
            ax.plot(t, data[comp], label=comp)
        ax.plot(t, vizio.speed(data), color="k", linewidth=1.5, label="|v|")
        ax.set_ylabel("velocity [m/s]")
    ax.set_xlabel("t [s]")
    ax.legend(loc="best", fontsize=8)
    ax.set_title(Path(args.trajectory).stem)
    fig.savefig(args.output, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return 0


if __name__ == "__main__":
    sys.exit(main())
