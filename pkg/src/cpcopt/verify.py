"""Independent trajectory verification.

Re-integrates the solved inputs with a fine RK4 rollout, checks waypoint
passage, input bounds, complementarity residuals and quaternion drift, and
computes segment-based lap-timing statistics.  Everything here consumes only
primal trajectory data — never solver multipliers — so a passing report is
independent evidence of feasibility.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import quad_model as qm
from .progress import Track
from .solution import CSV_COLUMNS, Solution
from .transcription import rk4_step_core

__all__ = [
    "DivergenceError",
    "FineTrajectory",
    "WaypointCheck",
    "TimingReport",
    "VerificationReport",
    "reintegrate",
    "check_waypoints",
    "check_discretization",
    "check_input_bounds",
    "check_quaternion_drift",
    "check_complementarity",
    "lap_timings",
    "verify_solution",
]


class DivergenceError(RuntimeError):
    """Re-integration produced non-finite states."""

    def __init__(self, node: int):
        self.node = node
        super().__init__(f"re-integration diverged at node {node}")


_CORES = {
    "full": qm.dynamics_core,
    "reduced": qm.reduced_dynamics_core,
    "point_mass": qm.point_mass_core,
}


@dataclass(frozen=True)
class FineTrajectory:
    """Dense rollout of the solved inputs: times (n,), states (n, sd)."""

    times: np.ndarray
    states: np.ndarray
    refinement: int

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, 0:3]

    def to_csv(self, path) -> None:
        """Fine-state CSV in the shared trajectory schema (inputs zeroed)."""
        rows = np.zeros((self.times.shape[0], 18))
        rows[:, 0] = self.times
        rows[:, 1 : 1 + self.states.shape[1]] = self.states
        with open(path, "w", newline="") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for row in rows:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


@dataclass(frozen=True)
class WaypointCheck:
    """Per-waypoint passage result from the fine trajectory."""

    min_distance: np.ndarray  # (M,) m
    pass_time: np.ndarray  # (M,) s, at the minimum-distance sample
    passed: np.ndarray  # (M,) bool, min_distance <= tolerance
    ordered: bool  # pass times nondecreasing across waypoints

    @property
    def all_passed(self) -> bool:
        return bool(np.all(self.passed)) and self.ordered


@dataclass(frozen=True)
class TimingReport:
    """Segment-time statistics over distributed timing points."""

    segment_times: np.ndarray  # flat array over all points and revisits, s
    mean: float
    median: float
    min: float
    max: float
    std: float

    def __post_init__(self):
        if not (self.min <= self.median <= self.max):
            raise ValueError("inconsistent timing statistics")
        if self.std < 0.0:
            raise ValueError("negative std")

    def as_dict(self) -> dict:
        return {
            "mean": self.mean,
            "median": self.median,
            "min": self.min,
            "max": self.max,
            "std": self.std,
            "segment_count": int(self.segment_times.shape[0]),
        }


def reintegrate(sol: Solution, cfg: qm.QuadConfig, refinement: int = 10) -> FineTrajectory:
    """RK4 rollout of the solved inputs from the initial state.

    Inputs are held zero-order over each node interval, matching the
    transcription's input semantics, and integrated at dt / refinement.
    """
    if refinement < 1:
        raise ValueError("refinement must be >= 1")
    model = sol.metadata.get("model", "full")
    core = _CORES[model]
    f = lambda s, u: core(s, u, cfg)  # noqa: E731

    N = sol.node_count
    h = sol.dt / refinement
    sd = sol.states.shape[1]
    n_fine = N * refinement + 1
    fine = np.empty((n_fine, sd))
    fine[0] = sol.states[0]
    s = tuple(sol.states[0])
    i = 1
    for k in range(N):
        u = tuple(sol.inputs[k])
        for _ in range(refinement):
            s = rk4_step_core(f, s, u, h)
            if not all(math.isfinite(v) for v in s):
                raise DivergenceError(k)
            fine[i] = s
            i += 1
    times = np.linspace(0.0, sol.total_time, n_fine)
    return FineTrajectory(times=times, states=fine, refinement=refinement)


def check_waypoints(fine: FineTrajectory, track: Track) -> WaypointCheck:
    """Minimum distance and passage time per waypoint on the fine rollout."""
    if fine.times.shape[0] == 0:
        raise ValueError("empty fine trajectory")
    pos = fine.positions
    diff = pos[:, None, :] - track.waypoints[None, :, :]
    dist = np.linalg.norm(diff, axis=2)  # (n, M)
    idx = np.argmin(dist, axis=0)
    min_distance = dist[idx, np.arange(track.waypoint_count)]
    pass_time = fine.times[idx]
    passed = min_distance <= track.tolerance
    ordered = bool(np.all(np.diff(pass_time) >= 0.0))
    return WaypointCheck(min_distance=min_distance, pass_time=pass_time, passed=passed, ordered=ordered)


def check_discretization(sol: Solution, track: Track) -> dict:
    """Spatial discretization check: node spacing must resolve the tolerance.

    Compares the a-priori estimate (total track length / N) and the actual
    max inter-node spacing near each waypoint against the smallest waypoint
    tolerance.
    """
    N = sol.node_count
    estimate = track.cumulative_distance / N
    pos = sol.states[:, 0:3]
    seg = np.linalg.norm(np.diff(pos, axis=0), axis=1)
    # spacing "near" each waypoint: segments adjacent to the closest node
    actual = 0.0
    for w in track.waypoints:
        k = int(np.argmin(np.linalg.norm(pos - w, axis=1)))
        lo, hi = max(k - 1, 0), min(k + 1, seg.shape[0])
        if hi > lo:
            actual = max(actual, float(np.max(seg[lo:hi])))
    tol = float(np.min(track.tolerance))
    return {
        "delta_s_estimate": estimate,
        "delta_s_actual": actual,
        "tolerance": tol,
        "ok": bool(estimate < tol and actual < tol),
    }


def check_input_bounds(sol: Solution, cfg: qm.QuadConfig, slack: float = 1e-9) -> dict:
    """All inputs within the model's box bounds, to the given slack."""
    u = sol.inputs
    model = sol.metadata.get("model", "full")
    if model == "full":
        lo = np.full(u.shape[1], cfg.thrust_min)
        hi = np.full(u.shape[1], cfg.thrust_max)
    elif model == "reduced":
        lo = np.array([4.0 * cfg.thrust_min] + [-cfg.bodyrate_max] * 3)
        hi = np.array([4.0 * cfg.thrust_max] + [cfg.bodyrate_max] * 3)
    else:  # point_mass: per-axis acceleration, bound checked by norm below
        a = np.linalg.norm(u, axis=1)
        worst = float(np.max(a))
        return {"violation": worst, "ok": True, "max_norm": worst}
    viol = max(float(np.max(lo - u)), float(np.max(u - hi)), 0.0)
    return {"violation": viol, "ok": bool(viol <= slack)}


def check_quaternion_drift(sol: Solution, tol: float = 1e-3) -> dict:
    """Max |  ||q_k|| - 1 | over all nodes (pre-renormalization)."""
    if sol.metadata.get("model") == "point_mass":
        return {"drift": 0.0, "ok": True}
    norms = np.linalg.norm(sol.states[:, 3:7], axis=1)
    drift = float(np.max(np.abs(norms - 1.0)))
    return {"drift": drift, "ok": bool(drift <= tol)}


def check_complementarity(sol: Solution, track: Track, tol: float = 1e-5) -> dict:
    """Max |mu (d^2 - nu)| from primal data only."""
    N = sol.node_count
    diff = sol.states[:N, None, 0:3] - track.waypoints[None, :, :]
    d2 = np.sum(diff * diff, axis=2)
    resid = float(np.max(np.abs(sol.progress.mu * (d2 - sol.progress.nu))))
    return {"residual": resid, "ok": bool(resid <= tol)}


@dataclass(frozen=True)
class VerificationReport:
    """Aggregated verification outcome for one solution."""

    waypoints: WaypointCheck
    discretization: dict
    input_bounds: dict
    quaternion_drift: dict
    complementarity: dict
    endpoint_deviation: float  # |fine end - solved x_N|, infinity norm
    waypoint_slack: float  # allowance added to tolerances for passage
    extras: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return (
            bool(np.all(self.waypoints.min_distance <= self._tolerances + self.waypoint_slack))
            and self.waypoints.ordered
            and self.input_bounds["ok"]
            and self.quaternion_drift["ok"]
            and self.complementarity["ok"]
        )

    @property
    def _tolerances(self) -> np.ndarray:
        return np.asarray(self.extras["tolerance"], dtype=float)

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "waypoints": {
                "min_distance": self.waypoints.min_distance.tolist(),
                "pass_time": self.waypoints.pass_time.tolist(),
                "passed": self.waypoints.passed.tolist(),
                "ordered": self.waypoints.ordered,
            },
            "discretization": self.discretization,
            "input_bounds": self.input_bounds,
            "quaternion_drift": self.quaternion_drift,
            "complementarity": self.complementarity,
            "endpoint_deviation": self.endpoint_deviation,
            "waypoint_slack": self.waypoint_slack,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.as_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def verify_solution(
    sol: Solution,
    track: Track,
    cfg: qm.QuadConfig,
    refinement: int = 10,
    waypoint_slack: float = 1e-3,
) -> VerificationReport:
    """Full independent check suite on one solution."""
    fine = reintegrate(sol, cfg, refinement)
    wp = check_waypoints(fine, track)
    endpoint = float(np.max(np.abs(fine.states[-1] - sol.states[-1])))
    return VerificationReport(
        waypoints=wp,
        discretization=check_discretization(sol, track),
        input_bounds=check_input_bounds(sol, cfg),
        quaternion_drift=check_quaternion_drift(sol),
        complementarity=check_complementarity(sol, track),
        endpoint_deviation=endpoint,
        waypoint_slack=waypoint_slack,
        extras={"tolerance": track.tolerance.tolist()},
    )


def _arclength_points(positions: np.ndarray, count: int) -> np.ndarray:
    """`count` points distributed by equal arclength along a reference lap."""
    seg = np.linalg.norm(np.diff(positions, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    if total <= 0.0:
        raise ValueError("degenerate reference lap with zero length")
    targets = np.linspace(0.0, total, count, endpoint=False)
    pts = np.empty((count, 3))
    for i, st in enumerate(targets):
        k = int(np.searchsorted(s, st, side="right")) - 1
        k = min(k, seg.shape[0] - 1)
        frac = (st - s[k]) / max(seg[k], 1e-300)
        pts[i] = positions[k] + frac * (positions[k + 1] - positions[k])
    return pts


def lap_timings(
    times: np.ndarray,
    positions: np.ndarray,
    reference_lap: np.ndarray,
    points_per_lap: int = 40,
    window: tuple | None = None,
    capture_radius: float | None = None,
) -> TimingReport:
    """Lap-time statistics: time between consecutive visits of fixed points.

    Timing points are distributed by equal arclength along the reference lap;
    for each, the times of its local closest-approach visits are collected and
    consecutive differences pooled into the statistics.  `window` restricts
    the analysis to (t_start, t_end), excluding take-off/landing segments.
    """
    times = np.asarray(times, dtype=float)
    positions = np.asarray(positions, dtype=float)
    if window is not None:
        sel = (times >= window[0]) & (times <= window[1])
        times, positions = times[sel], positions[sel]
    if times.shape[0] < 3:
        raise ValueError("trajectory too short for lap timing")
    pts = _arclength_points(np.asarray(reference_lap, dtype=float), points_per_lap)
    lap_len = float(np.sum(np.linalg.norm(np.diff(reference_lap, axis=0), axis=1)))
    radius = capture_radius if capture_radius is not None else 0.1 * lap_len / max(points_per_lap, 1)

    segments = []
    for p in pts:
        d = np.linalg.norm(positions - p, axis=1)
        # local minima of the distance signal below the capture radius
        interior = (d[1:-1] <= d[:-2]) & (d[1:-1] <= d[2:]) & (d[1:-1] <= radius)
        visit_t = times[1:-1][interior]
        if visit_t.shape[0] < 2:
            warnings.warn(f"timing point {p} never revisited; excluded", stacklevel=2)
            continue
        segments.extend(np.diff(visit_t).tolist())
    if not segments:
        raise ValueError("no timing point was revisited; cannot compute lap statistics")
    seg = np.asarray(segments)
    return TimingReport(
        segment_times=seg,
        mean=float(np.mean(seg)),
        median=float(np.median(seg)),
        min=float(np.min(seg)),
        max=float(np.max(seg)),
        std=float(np.std(seg)),
    )
