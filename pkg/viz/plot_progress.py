#!/usr/bin/env python3
"""Progress-variable plot: one lambda series per waypoint.

Usage:
  plot_progress.py progress.csv -o progress.png

If the CSV carries lam<j>_init columns, the initialization is drawn dashed
next to the solid final solution; otherwise only the final solution is drawn
and a warning is printed.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

sys.path.insert(0, str(Path(__file__).resolve().parent))
import vizio


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("progress", help="progress CSV (t, lam<j>[, lam<j>_init])")
    ap.add_argument("-o", "--output", required=True, help="output image path")
    args = ap.parse_args(argv)

    try:
        data, final_cols, init_cols = vizio.load_progress(args.progress)
    except (OSError, ValueError, vizio.SchemaError) as err:
        vizio.fail(str(err))

    if not init_cols:
        warnings.warn("no lam<j>_init columns; plotting the final solution only")

    t = data["t"]
    fig, ax = plt.subplots(figsize=(8, 4))
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for j, col in enumerate(final_cols):
        color = colors[j % len(colors)]
        ax.plot(t, data[col], color=color, linestyle="-", label=f"$\\lambda_{{{j}}}$ final")
        init_name = f"{col}_init"
        if init_name in init_cols:
            ax.plot(t, data[init_name], color=color, linestyle="--", alpha=0.7,
                    label=f"$\\lambda_{{{j}}}$ init")
    ax.annotate(f"$t_N$ = {t[-1]:.3f} s", xy=(0.98, 0.95), xycoords="axes fraction",
                ha="right", va="top")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("progress $\\lambda$")
    ax.set_ylim(-0.05, 1.05)
    ax.legend(loc="lower left", fontsize=8)
    ax.set_title(Path(args.progress).stem)
    fig.savefig(args.output, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return 0


if __name__ == "__main__":
    sys.exit(main())
