"""Progress-variable chain and the complementary progress constraint.

Each waypoint j owns a progress variable lambda^j running from 1
(incomplete) at node 0 to 0 (completed) at node N.  The per-node change
mu_k^j can only be non-zero while the position is within the waypoint
tolerance, enforced by the complementarity residual

    mu_k^j * (||p_k - p_wj||^2 - nu_k^j) = 0,   0 <= nu_k^j <= d_tol^2.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .quad_model import QuadState

__all__ = [
    "Track",
    "ProgressVariables",
    "progress_defect",
    "cpc_residual",
    "sequencing_residuals",
    "extract_pass_times",
    "ChainInconsistentError",
]

DEFAULT_TOLERANCE = 0.3


class ChainInconsistentError(RuntimeError):
    """Raised when a progress chain does not telescope to completion."""


@dataclass(frozen=True)
class EndConditions:
    """Optional terminal equality flags."""

    velocity_zero: bool = False
    attitude_identity: bool = False
    bodyrate_zero: bool = False

    @staticmethod
    def hover() -> "EndConditions":
        # matches the hover-to-hover benchmark setups: terminal velocity and
        # attitude pinned, bodyrate left free
        return EndConditions(velocity_zero=True, attitude_identity=True)

    @property
    def n_rows(self) -> int:
        # attitude pins the quaternion vector part only: +q and -q describe
        # the same rotation, and maneuvers ending in a full flip finish at -q
        return 3 * self.velocity_zero + 3 * self.attitude_identity + 3 * self.bodyrate_zero


@dataclass(frozen=True)
class Track:
    """Ordered waypoint sequence with pass tolerances and boundary states."""

    waypoints: np.ndarray  # (M, 3)
    tolerance: np.ndarray  # (M,) per-waypoint pass tolerance [m]
    start_state: QuadState
    end_conditions: EndConditions = field(default_factory=EndConditions)

    def __post_init__(self):
        wp = np.atleast_2d(np.asarray(self.waypoints, dtype=float))
        if wp.ndim != 2 or wp.shape[1] != 3 or wp.shape[0] < 1:
            raise ValueError("waypoints must be an (M, 3) array with M >= 1")
        tol = np.asarray(self.tolerance, dtype=float)
        if tol.ndim == 0:
            tol = np.full(wp.shape[0], float(tol))
        if tol.shape != (wp.shape[0],) or np.any(tol <= 0.0):
            raise ValueError("need one positive tolerance per waypoint")
        object.__setattr__(self, "waypoints", wp)
        object.__setattr__(self, "tolerance", tol)

    @property
    def waypoint_count(self) -> int:
        return self.waypoints.shape[0]

    @property
    def cumulative_distance(self) -> float:
        """Path length from the start position through all waypoints."""
        pts = np.vstack([self.start_state.position, self.waypoints])
        return float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))

    def check_discretization(self, node_count: int) -> bool:
        """Advisory D/N < min tolerance check; warns instead of raising."""
        delta_s = self.cumulative_distance / node_count
        ok = delta_s < float(np.min(self.tolerance))
        if not ok:
            warnings.warn(
                f"spatial discretization D/N = {delta_s:.3g} m is not below the "
                f"minimum waypoint tolerance {np.min(self.tolerance):.3g} m; "
                "waypoint nodes may be skipped",
                stacklevel=2,
            )
        return ok

    # -- JSON round trip ------------------------------------------------------

    def to_json(self) -> str:
        s = self.start_state
        return json.dumps(
            {
                "waypoints": self.waypoints.tolist(),
                "tolerance": self.tolerance.tolist(),
                "start_state": {
                    "position": s.position.tolist(),
                    "attitude": s.attitude.tolist(),
                    "velocity": s.velocity.tolist(),
                    "bodyrate": s.bodyrate.tolist(),
                },
                "end_conditions": {
                    "velocity_zero": self.end_conditions.velocity_zero,
                    "attitude_identity": self.end_conditions.attitude_identity,
                    "bodyrate_zero": self.end_conditions.bodyrate_zero,
                },
            },
            indent=2,
        )

    @staticmethod
    def from_json(text: str) -> "Track":
        data = json.loads(text)
        start = data.get("start_state", {})
        state = QuadState(
            np.asarray(start.get("position", [0, 0, 0]), dtype=float),
            np.asarray(start.get("attitude", [1, 0, 0, 0]), dtype=float),
            np.asarray(start.get("velocity", [0, 0, 0]), dtype=float),
            np.asarray(start.get("bodyrate", [0, 0, 0]), dtype=float),
        )
        ec = data.get("end_conditions", {})
        return Track(
            waypoints=np.asarray(data["waypoints"], dtype=float),
            tolerance=np.asarray(data.get("tolerance", DEFAULT_TOLERANCE), dtype=float),
            start_state=state,
            end_conditions=EndConditions(
                velocity_zero=bool(ec.get("velocity_zero", False)),
                attitude_identity=bool(ec.get("attitude_identity", False)),
                bodyrate_zero=bool(ec.get("bodyrate_zero", False)),
            ),
        )


@dataclass(frozen=True)
class ProgressVariables:
    """Per-node progress state: lambda (N+1, M), mu (N, M), nu (N, M)."""

    lam: np.ndarray
    mu: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        lam = np.atleast_2d(np.asarray(self.lam, dtype=float))
        mu = np.atleast_2d(np.asarray(self.mu, dtype=float))
        nu = np.atleast_2d(np.asarray(self.nu, dtype=float))
        if lam.shape[0] != mu.shape[0] + 1 or mu.shape != nu.shape or lam.shape[1] != mu.shape[1]:
            raise ValueError("inconsistent progress array shapes")
        for name, arr in (("lam", lam), ("mu", mu), ("nu", nu)):
            object.__setattr__(self, name, arr)

    def chain_residual(self) -> np.ndarray:
        return self.lam[1:] - self.lam[:-1] + self.mu


def progress_defect(lam_k, mu_k, lam_k1) -> np.ndarray:
    """Chain residual lambda_{k+1} - lambda_k + mu_k; zero iff consistent."""
    return np.asarray(lam_k1, dtype=float) - np.asarray(lam_k, dtype=float) + np.asarray(mu_k, dtype=float)


def cpc_residual(mu_kj, p_k, p_wj, nu_kj):
    """Complementarity residual mu * (||p - p_w||^2 - nu) for one node/waypoint."""
    d = np.asarray(p_k, dtype=float) - np.asarray(p_wj, dtype=float)
    return mu_kj * (float(d @ d) - nu_kj)


def sequencing_residuals(lam_k) -> np.ndarray:
    """Componentwise lambda^j - lambda^{j+1}; feasible when <= 0."""
    lam_k = np.asarray(lam_k, dtype=float)
    return lam_k[:-1] - lam_k[1:]


def extract_pass_times(total_time: float, lam: np.ndarray, chain_tol: float = 1e-6) -> np.ndarray:
    """Per-waypoint pass times at the lambda = 0.5 crossing.

    Linear interpolation between the nodes bracketing the crossing; requires
    a consistent, completed chain (lambda_0 = 1, lambda_N = 0, monotone).
    """
    lam = np.atleast_2d(np.asarray(lam, dtype=float))
    n_nodes, m = lam.shape
    if np.any(np.abs(lam[0] - 1.0) > chain_tol) or np.any(np.abs(lam[-1]) > chain_tol):
        raise ChainInconsistentError("progress chain does not run from 1 to 0")
    if np.any(lam[1:] - lam[:-1] > chain_tol):
        raise ChainInconsistentError("progress chain is not monotone non-increasing")
    dt = total_time / (n_nodes - 1)
    times = np.empty(m)
    for j in range(m):
        col = lam[:, j]
        k = int(np.argmax(col <= 0.5))  # first node at or below 0.5
        if k == 0:
            times[j] = 0.0
            continue
        frac = (col[k - 1] - 0.5) / max(col[k - 1] - col[k], 1e-300)
        times[j] = dt * (k - 1 + frac)
    if np.any(np.diff(times) < -chain_tol):
        raise ChainInconsistentError("pass times are not non-decreasing")
    return times
