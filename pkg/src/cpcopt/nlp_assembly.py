"""Assembly of the full minimum-time NLP.

The problem minimizes the single variable t_N subject to (in fixed row
order): initial-state equality, RK4 shooting defects, progress-chain
defects, progress boundary rows, optional terminal rows, optional
per-node input-norm rows (point-mass model), sequencing inequalities and
the complementary progress equalities.

All constraint derivatives are produced by forward-mode dual numbers
(:mod:`cpcopt.autodiff`), batched over shooting nodes and seeded per
sparsity column group; second-order duals supply the Lagrangian Hessian
used by the interior-point solver.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import quad_model as qm
from .autodiff import Dual, constant, seed
from .progress import Track
from .transcription import ShootingGrid, rk4_step_core

__all__ = ["BuildOptions", "CpcProblem", "build", "scale", "ScalingRecord", "EvaluationError"]


class EvaluationError(ValueError):
    """Non-finite entries encountered during an evaluation."""

    def __init__(self, indices):
        self.indices = np.atleast_1d(indices)
        super().__init__(f"non-finite variable entries at indices {self.indices[:8].tolist()}")


class ConfigurationError(ValueError):
    """Inconsistent build options."""


@dataclass(frozen=True)
class BuildOptions:
    """Options controlling problem construction."""

    node_count: int
    d_tol: float | None = None  # overrides per-waypoint track tolerances
    model: str = "full"  # full | reduced | point_mass
    enforce_bodyrate_limit: bool = True
    fix_last_waypoint: bool = False  # pin p_N to the final waypoint
    t_min: float = 1e-2
    a_max: float | None = None  # point-mass acceleration bound
    thrust_ramp_fraction: float = 0.0  # T_max ramped from hover over this time fraction


def _check_finite(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise EvaluationError(np.flatnonzero(~np.isfinite(x)))


class CpcProblem:
    """Assembled NLP: layout, bounds, constraint blocks, derivatives.

    Immutable after construction; evaluations are pure and re-entrant.
    """

    def __init__(self, track: Track, cfg: qm.QuadConfig, options: BuildOptions):
        N = options.node_count
        M = track.waypoint_count
        if N < 2 * M:
            import warnings

            warnings.warn(f"N = {N} below the 2M = {2 * M} node guidance", stacklevel=3)
        model = options.model
        if model not in ("full", "reduced", "point_mass"):
            raise ConfigurationError(f"unknown model {model!r}")
        if model == "point_mass" and not (options.a_max and options.a_max > 0):
            raise ConfigurationError("point_mass model requires a_max > 0")
        if options.fix_last_waypoint and track.end_conditions.n_rows == 0 and model != "point_mass":
            # allowed, but flag the common misconfiguration of free-end + pinned position
            pass

        self.track = track
        self.cfg = cfg
        self.options = options
        self.model = model

        ec = track.end_conditions
        end_rows = ec.n_rows + (3 if options.fix_last_waypoint else 0)
        if model == "point_mass":
            end_rows = (3 if ec.velocity_zero else 0) + (3 if options.fix_last_waypoint else 0)
            sd, idim = 6, 3
        else:
            sd, idim = 13, 4
        self.grid = ShootingGrid(
            node_count=N,
            waypoint_count=M,
            state_dim=sd,
            input_dim=idim,
            end_rows=end_rows,
            input_norm_rows=N if model == "point_mass" else 0,
        )
        self.n_var = self.grid.n_var
        self.n_con = self.grid.n_con
        self._nseeds = sd + idim + 1  # state, input, total time

        # waypoints and tolerances
        self.waypoints = track.waypoints.copy()
        tol = track.tolerance.copy()
        if options.d_tol is not None:
            tol = np.full(M, float(options.d_tol))
        self.d_tol = tol

        # initial state vector
        s0 = track.start_state
        if model == "point_mass":
            self.x_init = np.concatenate([s0.position, s0.velocity])
        else:
            self.x_init = s0.as_vector()

        self._cpc_pass_mask = None
        self._setup_bounds()
        self._setup_constraint_bounds()
        self._setup_jacobian_pattern()
        self._setup_hessian_pattern()

    # ------------------------------------------------------------------
    # bounds
    # ------------------------------------------------------------------

    def _thrust_max_schedule(self) -> np.ndarray:
        """Per-node upper thrust limit, optionally ramped up from hover."""
        N = self.grid.node_count
        cfg = self.cfg
        tmax = np.full(N, cfg.thrust_max)
        frac = self.options.thrust_ramp_fraction
        if frac > 0.0:
            n_ramp = max(1, int(round(frac * N)))
            ramp = np.linspace(cfg.hover_thrust, cfg.thrust_max, n_ramp)
            tmax[:n_ramp] = np.maximum(ramp, cfg.thrust_min + 1e-9)
        return tmax

    def _setup_bounds(self):
        g = self.grid
        cfg = self.cfg
        lb = np.full(self.n_var, -np.inf)
        ub = np.full(self.n_var, np.inf)
        lb[g.idx_time] = self.options.t_min
        tmax_sched = None
        if self.model == "full":
            tmax_sched = self._thrust_max_schedule()
        for k in range(g.node_count):
            us = g.input_slice(k)
            if self.model == "full":
                lb[us] = cfg.thrust_min
                ub[us] = tmax_sched[k]
                if self.options.enforce_bodyrate_limit and cfg.bodyrate_max > 0:
                    ws = g.state_slice(k)
                    lb[ws.start + 10 : ws.start + 13] = -cfg.bodyrate_max
                    ub[ws.start + 10 : ws.start + 13] = cfg.bodyrate_max
            elif self.model == "reduced":
                lb[us.start] = 4.0 * cfg.thrust_min
                ub[us.start] = 4.0 * cfg.thrust_max
                lb[us.start + 1 : us.stop] = -cfg.bodyrate_max
                ub[us.start + 1 : us.stop] = cfg.bodyrate_max
            ms, ns = g.mu_slice(k), g.nu_slice(k)
            lb[ms], ub[ms] = 0.0, 1.0
            lb[ns], ub[ns] = 0.0, self.d_tol**2
        if self.model == "full" and self.options.enforce_bodyrate_limit and cfg.bodyrate_max > 0:
            ws = g.state_slice(g.node_count)  # terminal node has no input row
            lb[ws.start + 10 : ws.start + 13] = -cfg.bodyrate_max
            ub[ws.start + 10 : ws.start + 13] = cfg.bodyrate_max
        self.lb, self.ub = lb, ub

    def _setup_constraint_bounds(self):
        off = self.grid.block_offsets
        lo = np.zeros(self.n_con)
        hi = np.zeros(self.n_con)
        a, b = off["sequencing"]
        lo[a:b] = -np.inf
        a, b = off["input_norm"]
        lo[a:b] = -np.inf
        self.con_lo, self.con_hi = lo, hi
        self.block_offsets = off

    def relaxed_copy(self, eps: float) -> "CpcProblem":
        """Copy with the complementarity rows relaxed to |r| <= eps."""
        out = copy.copy(self)
        out.con_lo = self.con_lo.copy()
        out.con_hi = self.con_hi.copy()
        a, b = self.block_offsets["cpc"]
        out.con_lo[a:b] = -eps
        out.con_hi[a:b] = eps
        return out

    # ------------------------------------------------------------------
    # fast unpack (layout is uniform, so reshape instead of slicing)
    # ------------------------------------------------------------------

    def split(self, x: np.ndarray):
        g = self.grid
        N, M, sd, idim = g.node_count, g.waypoint_count, g.state_dim, g.input_dim
        body = x[1 : 1 + N * g.node_stride].reshape(N, g.node_stride)
        states = np.empty((N + 1, sd))
        states[:N] = body[:, :sd]
        states[N] = x[g.state_slice(N)]
        inputs = body[:, sd : sd + idim]
        lam = np.empty((N + 1, M))
        lam[:N] = body[:, sd + idim : sd + idim + M]
        lam[N] = x[g.lam_slice(N)]
        mu = body[:, sd + idim + M : sd + idim + 2 * M]
        nu = body[:, sd + idim + 2 * M : sd + idim + 3 * M]
        return float(x[0]), states, inputs, lam, mu, nu

    # ------------------------------------------------------------------
    # cost
    # ------------------------------------------------------------------

    def eval_cost(self, x: np.ndarray) -> float:
        return float(x[self.grid.idx_time])

    def cost_gradient(self, x: np.ndarray) -> np.ndarray:
        grad = np.zeros(self.n_var)
        grad[self.grid.idx_time] = 1.0
        return grad

    # ------------------------------------------------------------------
    # dynamics core dispatch
    # ------------------------------------------------------------------

    def _deriv_core(self, s, u):
        if self.model == "full":
            return qm.dynamics_core(s, u, self.cfg)
        if self.model == "reduced":
            return qm.reduced_dynamics_core(s, u, self.cfg)
        return qm.point_mass_core(s, u)

    def _rk4_batch(self, t, states, inputs, order: int):
        """Batched RK4 over all N intervals.

        order 0: plain arrays; order 1/2: dual numbers seeded per column
        group (state_k, u_k, t_N).  Returns per-component scalar-likes.
        """
        g = self.grid
        N, sd, idim = g.node_count, g.state_dim, g.input_dim
        K = self._nseeds
        dt_val = np.full(N, t / N)
        if order == 0:
            xc = tuple(states[:N, i] for i in range(sd))
            uc = tuple(inputs[:, i] for i in range(idim))
            dt = dt_val
        else:
            xc = tuple(seed(states[:N, i], i, K, order) for i in range(sd))
            uc = tuple(seed(inputs[:, i], sd + i, K, order) for i in range(idim))
            dt = constant(dt_val, K, order)
            dt.dot[..., K - 1] = 1.0 / N
        out = list(rk4_step_core(lambda s, u: self._deriv_core(s, u), xc, uc, dt))
        if self.model == "reduced":
            # bodyrate states are tied to the commanded rates algebraically
            out[10], out[11], out[12] = uc[1], uc[2], uc[3]
        return out

    # ------------------------------------------------------------------
    # constraint values
    # ------------------------------------------------------------------

    def eval_constraints(self, x: np.ndarray) -> np.ndarray:
        _check_finite(x)
        g = self.grid
        N, M, sd = g.node_count, g.waypoint_count, g.state_dim
        t, states, inputs, lam, mu, nu = self.split(x)
        off = self.block_offsets
        c = np.empty(self.n_con)

        a, b = off["initial"]
        c[a:b] = states[0] - self.x_init

        rk4 = self._rk4_batch(t, states, inputs, order=0)
        pred = np.stack(rk4, axis=1)  # (N, sd)
        a, b = off["dynamics"]
        c[a:b] = (states[1:] - pred).ravel()

        a, b = off["progress"]
        c[a:b] = (lam[1:] - lam[:-1] + mu).ravel()

        a, b = off["boundary"]
        c[a : a + M] = lam[0] - 1.0
        c[a + M : b] = lam[N]

        a, b = off["end_state"]
        c[a:b] = self._end_rows(states)

        a, b = off["input_norm"]
        if b > a:
            c[a:b] = np.sum(inputs**2, axis=1) - self.options.a_max**2

        a, b = off["sequencing"]
        if b > a:
            c[a:b] = (lam[:N, :-1] - lam[:N, 1:]).ravel()

        a, b = off["cpc"]
        p = states[:N, 0:3]
        d2 = np.sum((p[:, None, :] - self.waypoints[None, :, :]) ** 2, axis=2)  # (N, M)
        if self._cpc_pass_mask is not None:
            c[a:b] = np.where(self._cpc_pass_mask, d2 - nu, mu).ravel()
        else:
            c[a:b] = (mu * (d2 - nu)).ravel()
        return c

    def _end_rows(self, states: np.ndarray) -> np.ndarray:
        ec = self.track.end_conditions
        xN = states[-1]
        rows = []
        if self.model == "point_mass":
            if ec.velocity_zero:
                rows.append(xN[3:6])
        else:
            if ec.velocity_zero:
                rows.append(xN[7:10])
            if ec.attitude_identity:
                rows.append(xN[4:7])  # vector part zero: q = +/- identity
            if ec.bodyrate_zero:
                rows.append(xN[10:13])
        if self.options.fix_last_waypoint:
            rows.append(xN[0:3] - self.waypoints[-1])
        return np.concatenate(rows) if rows else np.empty(0)

    # ------------------------------------------------------------------
    # jacobian
    # ------------------------------------------------------------------

    def _setup_jacobian_pattern(self):
        g = self.grid
        N, M, sd, idim = g.node_count, g.waypoint_count, g.state_dim, g.input_dim
        K = self._nseeds
        off = self.block_offsets
        rows: list[np.ndarray] = []
        cols: list[np.ndarray] = []
        const: list[np.ndarray] = []  # aligned with rows; nan marks dynamic entries

        def add(r, cl, data):
            rows.append(np.asarray(r, dtype=np.int64).ravel())
            cols.append(np.asarray(cl, dtype=np.int64).ravel())
            const.append(np.asarray(data, dtype=float).ravel())

        nan = np.nan

        # initial: identity on state_0
        a, _ = off["initial"]
        s0 = g.state_slice(0)
        add(a + np.arange(sd), np.arange(s0.start, s0.stop), np.ones(sd))

        # dynamics: -dF/d(state_k, u_k, t) then +I on state_{k+1}
        a, _ = off["dynamics"]
        dyn_cols = np.empty((N, K), dtype=np.int64)
        for k in range(N):
            ss, us = g.state_slice(k), g.input_slice(k)
            dyn_cols[k, :sd] = np.arange(ss.start, ss.stop)
            dyn_cols[k, sd : sd + idim] = np.arange(us.start, us.stop)
            dyn_cols[k, K - 1] = g.idx_time
        self._dyn_cols = dyn_cols
        r = a + np.repeat(np.arange(N * sd), K)
        cl = np.broadcast_to(dyn_cols[:, None, :], (N, sd, K)).ravel()
        self._jseg_dyn = (int(sum(len(v) for v in rows)), N * sd * K)
        add(r, cl, np.full(N * sd * K, nan))
        r = a + np.arange(N * sd)
        cl = np.concatenate([np.arange(g.state_slice(k + 1).start, g.state_slice(k + 1).stop) for k in range(N)])
        add(r, cl, np.ones(N * sd))

        # progress chain: +lam_{k+1} -lam_k +mu_k
        a, _ = off["progress"]
        lam_cols = np.empty((N + 1, M), dtype=np.int64)
        mu_cols = np.empty((N, M), dtype=np.int64)
        nu_cols = np.empty((N, M), dtype=np.int64)
        for k in range(N + 1):
            ls = g.lam_slice(k)
            lam_cols[k] = np.arange(ls.start, ls.stop)
            if k < N:
                ms, ns = g.mu_slice(k), g.nu_slice(k)
                mu_cols[k] = np.arange(ms.start, ms.stop)
                nu_cols[k] = np.arange(ns.start, ns.stop)
        self._lam_cols, self._mu_cols, self._nu_cols = lam_cols, mu_cols, nu_cols
        r = a + np.arange(N * M)
        add(r, lam_cols[1:].ravel(), np.ones(N * M))
        add(r, lam_cols[:-1].ravel(), -np.ones(N * M))
        add(r, mu_cols.ravel(), np.ones(N * M))

        # lambda boundary
        a, _ = off["boundary"]
        add(a + np.arange(M), lam_cols[0], np.ones(M))
        add(a + M + np.arange(M), lam_cols[N], np.ones(M))

        # end-state rows (identity scatter on state_N)
        a, b = off["end_state"]
        if b > a:
            sN = g.state_slice(N)
            idx = []
            ec = self.track.end_conditions
            if self.model == "point_mass":
                if ec.velocity_zero:
                    idx += list(range(3, 6))
            else:
                if ec.velocity_zero:
                    idx += list(range(7, 10))
                if ec.attitude_identity:
                    idx += list(range(4, 7))
                if ec.bodyrate_zero:
                    idx += list(range(10, 13))
            if self.options.fix_last_waypoint:
                idx += list(range(0, 3))
            add(a + np.arange(len(idx)), sN.start + np.asarray(idx), np.ones(len(idx)))

        # input-norm rows (point mass)
        a, b = off["input_norm"]
        if b > a:
            r = a + np.repeat(np.arange(N), idim)
            cl = np.concatenate([np.arange(g.input_slice(k).start, g.input_slice(k).stop) for k in range(N)])
            self._jseg_norm = (int(sum(len(v) for v in rows)), N * idim)
            add(r, cl, np.full(N * idim, nan))

        # sequencing
        a, b = off["sequencing"]
        if b > a:
            r = a + np.arange(N * (M - 1))
            add(r, lam_cols[:N, :-1].ravel(), np.ones(N * (M - 1)))
            add(r, lam_cols[:N, 1:].ravel(), -np.ones(N * (M - 1)))

        # cpc: 5 entries per row (mu, px, py, pz, nu)
        a, b = off["cpc"]
        p_cols = np.empty((N, 3), dtype=np.int64)
        for k in range(N):
            ss = g.state_slice(k)
            p_cols[k] = np.arange(ss.start, ss.start + 3)
        self._p_cols = p_cols
        cpc_cols = np.empty((N, M, 5), dtype=np.int64)
        cpc_cols[:, :, 0] = mu_cols
        cpc_cols[:, :, 1:4] = np.broadcast_to(p_cols[:, None, :], (N, M, 3))
        cpc_cols[:, :, 4] = nu_cols
        self._cpc_cols = cpc_cols
        r = a + np.repeat(np.arange(N * M), 5)
        self._jseg_cpc = (int(sum(len(v) for v in rows)), N * M * 5)
        add(r, cpc_cols.ravel(), np.full(N * M * 5, nan))

        self._jrows = np.concatenate(rows)
        self._jcols = np.concatenate(cols)
        self._jconst = np.concatenate(const)

    @property
    def jacobian_pattern(self) -> tuple[np.ndarray, np.ndarray]:
        """(row, col) pairs; a stable superset of the true nonzero set."""
        return self._jrows.copy(), self._jcols.copy()

    def _cpc_duals(self, states, mu, nu, order: int):
        """Dual evaluation of the complementarity rows, seeds (mu, p, nu)."""
        N, M = self.grid.node_count, self.grid.waypoint_count
        shape = (N, M)
        mask = self._cpc_pass_mask
        if mask is not None:
            # polished rows: the bilinear product is split into its smooth
            # branches, mu = 0 away from the pass and d^2 - nu = 0 at it
            diff = states[:N, None, 0:3] - self.waypoints[None, :, :]
            val = np.where(mask, np.sum(diff * diff, axis=2) - nu, mu)
            dot = np.zeros(shape + (5,))
            dot[..., 0] = np.where(mask, 0.0, 1.0)
            for i in range(3):
                dot[..., 1 + i] = np.where(mask, 2.0 * diff[..., i], 0.0)
            dot[..., 4] = np.where(mask, -1.0, 0.0)
            out = Dual(val, dot, None)
            if order >= 2:
                ddot = np.zeros(shape + (5, 5))
                for i in range(1, 4):
                    ddot[..., i, i] = np.where(mask, 2.0, 0.0)
                out = Dual(val, dot, ddot)
            return out
        mu_d = seed(np.broadcast_to(mu, shape), 0, 5, order)
        nu_d = seed(np.broadcast_to(nu, shape), 4, 5, order)
        d2 = None
        for i in range(3):
            pi = seed(
                np.broadcast_to(states[:N, i : i + 1], shape), 1 + i, 5, order
            ) - self.waypoints[:, i]
            term = pi * pi
            d2 = term if d2 is None else d2 + term
        return mu_d * (d2 - nu_d)

    def polished_copy(self, pass_mask: np.ndarray) -> "CpcProblem":
        """Copy with complementarity rows split by an active-set guess.

        pass_mask is (N, M) boolean: True rows become d^2 - nu = 0, False
        rows become mu = 0.  All rows are smooth and regular, which avoids
        the degenerate geometry of the exact bilinear equalities.
        """
        N, M = self.grid.node_count, self.grid.waypoint_count
        mask = np.asarray(pass_mask, dtype=bool)
        if mask.shape != (N, M):
            raise ValueError(f"pass_mask shape {mask.shape}, expected {(N, M)}")
        out = copy.copy(self)
        out._cpc_pass_mask = mask
        out.con_lo = self.con_lo.copy()
        out.con_hi = self.con_hi.copy()
        a, b = self.block_offsets["cpc"]
        out.con_lo[a:b] = 0.0
        out.con_hi[a:b] = 0.0
        return out

    def eval_jacobian(self, x: np.ndarray) -> sp.csr_matrix:
        """Constraint Jacobian in the declared sparsity pattern."""
        _check_finite(x)
        g = self.grid
        N, sd = g.node_count, g.state_dim
        t, states, inputs, lam, mu, nu = self.split(x)
        data = self._jconst.copy()

        duals = self._rk4_batch(t, states, inputs, order=1)
        fdot = np.stack([d.dot for d in duals], axis=1)  # (N, sd, K)
        a, n = self._jseg_dyn
        data[a : a + n] = -fdot.ravel()

        if self.model == "point_mass":
            a, n = self._jseg_norm
            data[a : a + n] = (2.0 * inputs).ravel()

        cpc = self._cpc_duals(states, mu, nu, order=1)
        a, n = self._jseg_cpc
        data[a : a + n] = cpc.dot.ravel()

        return sp.csr_matrix(
            sp.coo_matrix((data, (self._jrows, self._jcols)), shape=(self.n_con, self.n_var))
        )

    # ------------------------------------------------------------------
    # Lagrangian Hessian (sum_i y_i * hess(c_i); cost is linear)
    # ------------------------------------------------------------------

    def _setup_hessian_pattern(self):
        g = self.grid
        N, M, idim = g.node_count, g.waypoint_count, g.input_dim
        K = self._nseeds
        rows = [np.broadcast_to(self._dyn_cols[:, :, None], (N, K, K)).ravel()]
        cols = [np.broadcast_to(self._dyn_cols[:, None, :], (N, K, K)).ravel()]
        cpc_cols = self._cpc_cols
        rows.append(np.broadcast_to(cpc_cols[:, :, :, None], (N, M, 5, 5)).ravel())
        cols.append(np.broadcast_to(cpc_cols[:, :, None, :], (N, M, 5, 5)).ravel())
        if self.model == "point_mass":
            ucols = np.stack(
                [np.arange(g.input_slice(k).start, g.input_slice(k).stop) for k in range(N)]
            )
            rows.append(np.broadcast_to(ucols[:, :, None], (N, idim, idim)).ravel())
            cols.append(np.broadcast_to(ucols[:, None, :], (N, idim, idim)).ravel())
        self._hrows = np.concatenate(rows)
        self._hcols = np.concatenate(cols)

    def eval_lagrangian_hessian(self, x: np.ndarray, y: np.ndarray) -> sp.csr_matrix:
        return self._kkt_sweep(x, y)[2]

    def eval_kkt_data(self, x: np.ndarray, y: np.ndarray):
        """One second-order AD sweep: (constraints, Jacobian, Hessian)."""
        return self._kkt_sweep(x, y)

    def _kkt_sweep(self, x: np.ndarray, y: np.ndarray):
        _check_finite(x)
        g = self.grid
        N, M, sd = g.node_count, g.waypoint_count, g.state_dim
        K = self._nseeds
        off = self.block_offsets
        t, states, inputs, lam, mu, nu = self.split(x)

        duals = self._rk4_batch(t, states, inputs, order=2)
        fval = np.stack([d.val for d in duals], axis=1)
        fdot = np.stack([d.dot for d in duals], axis=1)
        fddot = np.stack([d.ddot for d in duals], axis=1)  # (N, sd, K, K)

        cpc = self._cpc_duals(states, mu, nu, order=2)

        # constraint values
        c = np.empty(self.n_con)
        a, b = off["initial"]
        c[a:b] = states[0] - self.x_init
        a, b = off["dynamics"]
        c[a:b] = (states[1:] - fval).ravel()
        a, b = off["progress"]
        c[a:b] = (lam[1:] - lam[:-1] + mu).ravel()
        a, b = off["boundary"]
        c[a : a + M] = lam[0] - 1.0
        c[a + M : b] = lam[N]
        a, b = off["end_state"]
        c[a:b] = self._end_rows(states)
        a, b = off["input_norm"]
        if b > a:
            c[a:b] = np.sum(inputs**2, axis=1) - self.options.a_max**2
        a, b = off["sequencing"]
        if b > a:
            c[a:b] = (lam[:N, :-1] - lam[:N, 1:]).ravel()
        a, b = off["cpc"]
        c[a:b] = cpc.val.ravel()

        # jacobian
        jdata = self._jconst.copy()
        a, n = self._jseg_dyn
        jdata[a : a + n] = -fdot.ravel()
        if self.model == "point_mass":
            a, n = self._jseg_norm
            jdata[a : a + n] = (2.0 * inputs).ravel()
        a, n = self._jseg_cpc
        jdata[a : a + n] = cpc.dot.ravel()
        jac = sp.csr_matrix(
            sp.coo_matrix((jdata, (self._jrows, self._jcols)), shape=(self.n_con, self.n_var))
        )

        # hessian: dynamics blocks contracted with multipliers, cpc blocks,
        # point-mass norm rows
        y = np.asarray(y, dtype=float)
        a, b = off["dynamics"]
        ydyn = y[a:b].reshape(N, sd)
        hdyn = -np.einsum("ns,nsjk->njk", ydyn, fddot)
        hdata = [hdyn.ravel()]
        a, b = off["cpc"]
        ycpc = y[a:b].reshape(N, M)
        hdata.append((ycpc[:, :, None, None] * cpc.ddot).ravel())
        if self.model == "point_mass":
            a, b = off["input_norm"]
            ynorm = y[a:b]
            eye = np.broadcast_to(np.eye(g.input_dim), (N, g.input_dim, g.input_dim))
            hdata.append((2.0 * ynorm[:, None, None] * eye).ravel())
        hess = sp.csr_matrix(
            sp.coo_matrix(
                (np.concatenate(hdata), (self._hrows, self._hcols)),
                shape=(self.n_var, self.n_var),
            )
        )
        return c, jac, hess

    # ------------------------------------------------------------------
    # statistics
    # ------------------------------------------------------------------

    def stats(self) -> dict:
        nnz = len(self._jrows)
        return {
            "model": self.model,
            "node_count": self.grid.node_count,
            "waypoint_count": self.grid.waypoint_count,
            "n_var": self.n_var,
            "n_con": self.n_con,
            "jacobian_nnz": int(nnz),
            "jacobian_density": nnz / float(self.n_con * self.n_var),
            "blocks": {k: list(v) for k, v in self.block_offsets.items()},
        }


def build(track: Track, cfg: qm.QuadConfig, options: BuildOptions) -> CpcProblem:
    """Assemble the minimum-time NLP for a track and vehicle."""
    return CpcProblem(track, cfg, options)


# ---------------------------------------------------------------------------
# scaling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingRecord:
    """Diagonal variable and constraint-row scalings (original = S * scaled)."""

    x_scale: np.ndarray
    c_scale: np.ndarray

    def unscale_x(self, xs: np.ndarray) -> np.ndarray:
        return xs * self.x_scale

    def scale_x(self, x: np.ndarray) -> np.ndarray:
        return x / self.x_scale


class ScaledProblem:
    """View of a problem in scaled variables; same evaluation interface."""

    def __init__(self, inner: CpcProblem, record: ScalingRecord):
        if np.any(record.x_scale <= 0) or np.any(record.c_scale <= 0):
            raise ValueError("scaling factors must be positive")
        self.inner = inner
        self.record = record
        self.grid = inner.grid
        self.model = inner.model
        self.n_var = inner.n_var
        self.n_con = inner.n_con
        self.lb = inner.lb / record.x_scale
        self.ub = inner.ub / record.x_scale
        self.con_lo = inner.con_lo * record.c_scale
        self.con_hi = inner.con_hi * record.c_scale
        self.block_offsets = inner.block_offsets
        self.track = inner.track
        self.cfg = inner.cfg
        self.options = inner.options
        self.d_tol = inner.d_tol
        self.waypoints = inner.waypoints

    def split(self, xs):
        return self.inner.split(self.record.unscale_x(xs))

    def relaxed_copy(self, eps: float) -> "ScaledProblem":
        out = copy.copy(self)
        out.con_lo = self.con_lo.copy()
        out.con_hi = self.con_hi.copy()
        a, b = self.block_offsets["cpc"]
        out.con_lo[a:b] = -eps * self.record.c_scale[a:b]
        out.con_hi[a:b] = eps * self.record.c_scale[a:b]
        out.inner = self.inner.relaxed_copy(eps)
        return out

    def polished_copy(self, pass_mask) -> "ScaledProblem":
        out = copy.copy(self)
        out.inner = self.inner.polished_copy(pass_mask)
        out.con_lo = out.inner.con_lo * self.record.c_scale
        out.con_hi = out.inner.con_hi * self.record.c_scale
        return out

    def eval_cost(self, xs):
        return self.inner.eval_cost(self.record.unscale_x(xs)) / self.record.x_scale[0]

    def cost_gradient(self, xs):
        # cost is t (variable 0); in scaled variables the gradient is e_0
        g = np.zeros(self.n_var)
        g[0] = 1.0
        return g

    def eval_constraints(self, xs):
        return self.record.c_scale * self.inner.eval_constraints(self.record.unscale_x(xs))

    def eval_jacobian(self, xs):
        J = self.inner.eval_jacobian(self.record.unscale_x(xs))
        return sp.diags(self.record.c_scale) @ J @ sp.diags(self.record.x_scale)

    def eval_lagrangian_hessian(self, xs, ys):
        H = self.inner.eval_lagrangian_hessian(self.record.unscale_x(xs), self.record.c_scale * ys)
        D = sp.diags(self.record.x_scale)
        return D @ H @ D

    def eval_kkt_data(self, xs, ys):
        c, J, H = self.inner.eval_kkt_data(self.record.unscale_x(xs), self.record.c_scale * ys)
        Dx = sp.diags(self.record.x_scale)
        Dc = sp.diags(self.record.c_scale)
        return self.record.c_scale * c, Dc @ J @ Dx, Dx @ H @ Dx


def default_scaling(problem: CpcProblem) -> ScalingRecord:
    """Length by track extent, thrust by T_max, time by a speed guess."""
    g = problem.grid
    track = problem.track
    pts = np.vstack([track.start_state.position, track.waypoints])
    extent = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    extent = max(extent, 1.0)
    xs = np.ones(problem.n_var)
    xs[g.idx_time] = max(track.cumulative_distance, 1.0)  # ~ distance / 1 m/s guess
    for k in range(g.node_count + 1):
        ss = g.state_slice(k)
        xs[ss.start : ss.start + 3] = extent
        if problem.model == "point_mass":
            xs[ss.start + 3 : ss.start + 6] = extent
        else:
            xs[ss.start + 7 : ss.start + 10] = extent
        if k < g.node_count and problem.model == "full":
            us = g.input_slice(k)
            xs[us] = problem.cfg.thrust_max
        if k < g.node_count:
            # slack variables live in a [0, d_tol^2] box; map it to [0, 1]
            ns = g.nu_slice(k)
            xs[ns] = np.maximum(problem.d_tol**2, 1e-12)
    cs = np.ones(problem.n_con)
    return ScalingRecord(x_scale=xs, c_scale=cs)


def scale(problem: CpcProblem, record: ScalingRecord | None = None):
    """Return (scaled problem, scaling record); unscaling is exact."""
    if record is None:
        record = default_scaling(problem)
    return ScaledProblem(problem, record), record
