"""Multiple-shooting transcription: variable layout, RK4 step and defects.

Variable layout (free total time t_N first, then node-major):

    x = [t_N, x_0, ..., x_N]
    x_k = [state_k, input_k, lambda_k, mu_k, nu_k]   for k < N
    x_N = [state_N, lambda_N]

The layout is parametric in the state/input dimensions so the same grid
serves the full quadrotor model (13/4), the reduced model (13/4) and the
point-mass warm-start model (6/3).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ShootingGrid", "rk4_step_core", "rk4_step", "defect"]


@dataclass(frozen=True)
class ShootingGrid:
    """Node layout plus global variable / constraint-block indexing."""

    node_count: int  # N
    waypoint_count: int  # M
    state_dim: int = 13
    input_dim: int = 4
    end_rows: int = 0  # optional terminal equality rows
    input_norm_rows: int = 0  # per-node ||u||^2 inequality (point-mass model)

    def __post_init__(self):
        if self.node_count < 2:
            raise ValueError("need at least 2 nodes")
        if self.waypoint_count < 1:
            raise ValueError("need at least 1 waypoint")

    # -- variable indexing --------------------------------------------------

    @property
    def node_stride(self) -> int:
        return self.state_dim + self.input_dim + 3 * self.waypoint_count

    @property
    def n_var(self) -> int:
        return 1 + self.node_count * self.node_stride + self.state_dim + self.waypoint_count

    @property
    def idx_time(self) -> int:
        return 0

    def _base(self, k: int) -> int:
        if not 0 <= k <= self.node_count:
            raise IndexError(f"node {k} out of range")
        return 1 + k * self.node_stride

    def state_slice(self, k: int) -> slice:
        b = self._base(k)
        return slice(b, b + self.state_dim)

    def input_slice(self, k: int) -> slice:
        if k >= self.node_count:
            raise IndexError("node N has no input")
        b = self._base(k) + self.state_dim
        return slice(b, b + self.input_dim)

    def lam_slice(self, k: int) -> slice:
        b = self._base(k) + (self.state_dim if k == self.node_count else self.state_dim + self.input_dim)
        return slice(b, b + self.waypoint_count)

    def mu_slice(self, k: int) -> slice:
        if k >= self.node_count:
            raise IndexError("node N has no mu")
        b = self._base(k) + self.state_dim + self.input_dim + self.waypoint_count
        return slice(b, b + self.waypoint_count)

    def nu_slice(self, k: int) -> slice:
        if k >= self.node_count:
            raise IndexError("node N has no nu")
        b = self._base(k) + self.state_dim + self.input_dim + 2 * self.waypoint_count
        return slice(b, b + self.waypoint_count)

    # -- constraint-block offsets (row order is fixed and documented) -------
    # initial | dynamics | progress | lambda boundary | end state |
    # sequencing | cpc

    @property
    def n_dyn_rows(self) -> int:
        return self.node_count * self.state_dim

    @property
    def block_offsets(self) -> dict[str, tuple[int, int]]:
        N, M, sd = self.node_count, self.waypoint_count, self.state_dim
        sizes = [
            ("initial", sd),
            ("dynamics", N * sd),
            ("progress", N * M),
            ("boundary", 2 * M),
            ("end_state", self.end_rows),
            ("input_norm", self.input_norm_rows),
            ("sequencing", N * (M - 1)),
            ("cpc", N * M),
        ]
        out = {}
        off = 0
        for name, size in sizes:
            out[name] = (off, off + size)
            off += size
        return out

    @property
    def n_con(self) -> int:
        return self.block_offsets["cpc"][1]

    # -- pack / unpack -------------------------------------------------------

    def pack(self, t_total, states, inputs, lam, mu, nu) -> np.ndarray:
        N, M = self.node_count, self.waypoint_count
        x = np.empty(self.n_var)
        x[0] = t_total
        states = np.asarray(states, dtype=float)
        inputs = np.asarray(inputs, dtype=float)
        lam = np.asarray(lam, dtype=float)
        mu = np.asarray(mu, dtype=float)
        nu = np.asarray(nu, dtype=float)
        for k in range(N + 1):
            x[self.state_slice(k)] = states[k]
            x[self.lam_slice(k)] = lam[k]
            if k < N:
                x[self.input_slice(k)] = inputs[k]
                x[self.mu_slice(k)] = mu[k]
                x[self.nu_slice(k)] = nu[k]
        return x

    def unpack(self, x: np.ndarray):
        N, M = self.node_count, self.waypoint_count
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_var,):
            raise ValueError(f"expected vector of length {self.n_var}, got {x.shape}")
        states = np.stack([x[self.state_slice(k)] for k in range(N + 1)])
        inputs = np.stack([x[self.input_slice(k)] for k in range(N)])
        lam = np.stack([x[self.lam_slice(k)] for k in range(N + 1)])
        mu = np.stack([x[self.mu_slice(k)] for k in range(N)])
        nu = np.stack([x[self.nu_slice(k)] for k in range(N)])
        return x[0], states, inputs, lam, mu, nu


def rk4_step_core(f, x, u, dt):
    """Classical RK4 step on scalar-like components.

    ``x`` / ``u`` are sequences of scalar-likes (floats, arrays or duals),
    ``f(x, u)`` returns the derivative components, ``dt`` is scalar-like.
    """
    h2 = 0.5 * dt
    k1 = f(x, u)
    k2 = f(tuple(xi + h2 * ki for xi, ki in zip(x, k1)), u)
    k3 = f(tuple(xi + h2 * ki for xi, ki in zip(x, k2)), u)
    k4 = f(tuple(xi + dt * ki for xi, ki in zip(x, k3)), u)
    sixth = 1.0 / 6.0
    return tuple(
        xi + dt * (sixth * (a + 2.0 * b + 2.0 * c + d))
        for xi, a, b, c, d in zip(x, k1, k2, k3, k4)
    )


def rk4_step(f, x, u, dt: float) -> np.ndarray:
    """RK4 step for a vector field ``f(x, u) -> ndarray`` on flat arrays."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    k1 = np.asarray(f(x, u))
    k2 = np.asarray(f(x + 0.5 * dt * k1, u))
    k3 = np.asarray(f(x + 0.5 * dt * k2, u))
    k4 = np.asarray(f(x + dt * k3, u))
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def defect(x_k, u_k, x_k1, dt: float, f) -> np.ndarray:
    """Shooting defect x_{k+1} - RK4(x_k, u_k, dt); zero iff consistent."""
    return np.asarray(x_k1, dtype=float) - rk4_step(f, x_k, u_k, dt)
