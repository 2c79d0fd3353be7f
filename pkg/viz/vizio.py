"""Shared CSV/JSON loading for the plotting scripts.

The scripts are read-only consumers of the solver CLI's artifacts; the only
derived quantity they compute is a finite-difference acceleration used for
coloring.
"""

from __future__ import annotations

import json
import sys

import numpy as np

TRAJECTORY_COLUMNS = (
    "t", "px", "py", "pz", "qw", "qx", "qy", "qz",
    "vx", "vy", "vz", "wx", "wy", "wz", "T1", "T2", "T3", "T4",
)


class SchemaError(Exception):
    pass


def load_trajectory(path):
    data = np.genfromtxt(path, delimiter=",", names=True)
    if data.dtype.names is None:
        raise SchemaError(f"{path}: missing header row")
    missing = [c for c in TRAJECTORY_COLUMNS[:14] if c not in data.dtype.names]
    if missing:
        raise SchemaError(f"{path}: missing trajectory columns {missing}")
    if data.shape == ():  # single-row file
        data = data.reshape(1)
    return data


def load_progress(path):
    data = np.genfromtxt(path, delimiter=",", names=True)
    if data.dtype.names is None or "t" not in data.dtype.names:
        raise SchemaError(f"{path}: missing header row with a 't' column")
    if data.shape == ():
        data = data.reshape(1)
    final = sorted(n for n in data.dtype.names if n.startswith("lam") and not n.endswith("_init"))
    init = sorted(n for n in data.dtype.names if n.startswith("lam") and n.endswith("_init"))
    if not final:
        raise SchemaError(f"{path}: no lam<j> columns found")
    return data, final, init


def load_track(path):
    """Waypoint centers and tolerance from a scenario/track JSON file."""
    with open(path) as fh:
        obj = json.load(fh)
    wps = np.asarray(obj["waypoints"], dtype=float)
    tol = float(obj.get("d_tol", obj.get("tolerance", 0.0)))
    return wps, tol


def speed(data):
    return np.sqrt(data["vx"] ** 2 + data["vy"] ** 2 + data["vz"] ** 2)


def accel_magnitude(data):
    """|dv/dt| by central differences over the node times, one-sided ends."""
    v = np.stack([data["vx"], data["vy"], data["vz"]], axis=1)
    t = data["t"]
    if t.size < 2:
        return np.zeros(t.size)
    a = np.gradient(v, t, axis=0)
    return np.linalg.norm(a, axis=1)


def fail(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)
    raise SystemExit(1)
