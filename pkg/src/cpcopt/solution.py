"""Solved trajectory container shared by the solver, verifier and CLI."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .progress import ProgressVariables, extract_pass_times

__all__ = ["Solution"]

CSV_COLUMNS = [
    "t",
    "px",
    "py",
    "pz",
    "qw",
    "qx",
    "qy",
    "qz",
    "vx",
    "vy",
    "vz",
    "wx",
    "wy",
    "wz",
    "T1",
    "T2",
    "T3",
    "T4",
]


@dataclass(frozen=True)
class Solution:
    """Optimized trajectory: total time, per-node states/inputs, progress."""

    total_time: float
    states: np.ndarray  # (N+1, 13) [p, q, v, w]
    inputs: np.ndarray  # (N, n_u)
    progress: ProgressVariables
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "states", np.asarray(self.states, dtype=float))
        object.__setattr__(self, "inputs", np.asarray(self.inputs, dtype=float))
        if self.total_time <= 0.0:
            raise ValueError("total_time must be positive")
        if self.states.shape[0] != self.inputs.shape[0] + 1:
            raise ValueError("need one more state row than input rows")
        if self.progress.mu.shape[0] != self.inputs.shape[0]:
            raise ValueError("progress arrays do not match node count")

    @property
    def node_count(self) -> int:
        return self.inputs.shape[0]

    @property
    def dt(self) -> float:
        return self.total_time / self.node_count

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.total_time, self.node_count + 1)

    def pass_times(self) -> np.ndarray:
        return extract_pass_times(self.total_time, self.progress.lam)

    def renormalized(self) -> "Solution":
        """Copy with per-node quaternions renormalized (export hygiene)."""
        states = self.states.copy()
        norms = np.linalg.norm(states[:, 3:7], axis=1, keepdims=True)
        states[:, 3:7] /= norms
        return Solution(self.total_time, states, self.inputs, self.progress, dict(self.metadata))

    # -- CSV / JSON artifacts -------------------------------------------------

    def to_csv(self, path) -> None:
        """Trajectory CSV in the fixed column schema (17 significant digits)."""
        n_u = self.inputs.shape[1]
        rows = np.zeros((self.node_count + 1, 18))
        rows[:, 0] = self.times
        rows[:, 1:14] = self.states
        rows[:-1, 14 : 14 + n_u] = self.inputs
        rows[-1, 14 : 14 + n_u] = self.inputs[-1]  # repeat last hold for plotting
        with open(path, "w", newline="") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for row in rows:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")

    def progress_to_csv(self, path, initial_lam: np.ndarray | None = None) -> None:
        """Progress CSV: t, lambda per waypoint (optionally initial lambda)."""
        m = self.progress.lam.shape[1]
        header = ["t"] + [f"lam{j}" for j in range(m)]
        init = None
        if initial_lam is not None:
            init = np.asarray(initial_lam, dtype=float)
            header += [f"lam{j}_init" for j in range(m)]
        with open(path, "w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for i, t in enumerate(self.times):
                vals = [t, *self.progress.lam[i]]
                if init is not None:
                    vals += list(init[i])
                fh.write(",".join(f"{v:.17g}" for v in vals) + "\n")

    def summary(self) -> dict:
        return {
            "total_time": self.total_time,
            "node_count": self.node_count,
            "waypoint_count": self.progress.lam.shape[1],
            "pass_times": self.pass_times().tolist(),
            **{k: v for k, v in self.metadata.items() if isinstance(v, (str, int, float, bool))},
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2)
