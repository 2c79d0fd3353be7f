#!/usr/bin/env python3
"""3D flight path colored by speed or acceleration magnitude.

Usage:
  plot_path3d.py trajectory.csv -o path.png [--color speed|accel]
                 [--track scenario.json] [--vmin V --vmax V]

The track JSON (optional) supplies waypoint centers and the tolerance radius;
each waypoint is drawn as a translucent sphere of that radius.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent))
import vizio


def draw_sphere(ax, center, radius, color="tab:orange", alpha=0.25):
    u = np.linspace(0.0, 2 * np.pi, 24)
    v = np.linspace(0.0, np.pi, 12)
    x = center[0] + radius * np.outer(np.cos(u), np.sin(v))
    y = center[1] + radius * np.outer(np.sin(u), np.sin(v))
    z = center[2] + radius * np.outer(np.ones_like(u), np.cos(v))
    ax.plot_surface(x, y, z, color=color, alpha=alpha, linewidth=0, shade=False)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("trajectory", help="trajectory CSV (fixed 18-column schema)")
    ap.add_argument("-o", "--output", required=True, help="output image path")
    ap.add_argument("--color", choices=["speed", "accel"], default="speed")
    ap.add_argument("--track", help="scenario/track JSON for waypoint spheres")
    ap.add_argument("--vmin", type=float, help="fixed lower color-scale bound")
    ap.add_argument("--vmax", type=float, help="fixed upper color-scale bound")
    args = ap.parse_args(argv)

    try:
        data = vizio.load_trajectory(args.trajectory)
    except (OSError, ValueError, vizio.SchemaError) as err:
        vizio.fail(str(err))

    pos = np.stack([data["px"], data["py"], data["pz"]], axis=1)
    if args.color == "speed":
        c = vizio.speed(data)
        label = "speed [m/s]"
    else:
        c = vizio.accel_magnitude(data)
        label = "acceleration [m/s$^2$]"

    fig = plt.figure(figsize=(8, 6))
    ax = fig.add_subplot(111, projection="3d")
    if pos.shape[0] == 1:
        sc = ax.scatter(pos[:, 0], pos[:, 1], pos[:, 2], c=c, vmin=args.vmin, vmax=args.vmax)
    else:
        sc = ax.scatter(
            pos[:, 0], pos[:, 1], pos[:, 2],
            c=c, s=6, cmap="viridis", vmin=args.vmin, vmax=args.vmax,
        )
        ax.plot(pos[:, 0], pos[:, 1], pos[:, 2], color="0.8", linewidth=0.5, zorder=0)
    fig.colorbar(sc, ax=ax, shrink=0.7, label=label)

    if args.track:
        try:
            wps, tol = vizio.load_track(args.track)
        except (OSError, ValueError, KeyError) as err:
            vizio.fail(f"cannot read track file: {err}")
        for w in wps:
            draw_sphere(ax, w, max(tol, 1e-3))

    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_zlabel("z [m]")
    ax.set_title(Path(args.trajectory).stem)
    try:
        ax.set_box_aspect(np.ptp(pos, axis=0) + 1e-9)
    except Exception:
        pass
    fig.savefig(args.output, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return 0


if __name__ == "__main__":
    sys.exit(main())
