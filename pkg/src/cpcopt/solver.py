"""Primal-dual interior-point solver for the assembled NLP.

All constraint rows are brought into the form c(x) - r = 0 with bounded
slacks r for ranged/inequality rows, leaving a barrier problem with only
equality constraints and simple bounds.  Newton steps come from a sparse
regularized KKT factorization (SuperLU) with an inertia-free curvature
test; globalization is a filter line search with second-order corrections
and a Gauss-Newton feasibility restoration fallback.  The complementarity
rows can additionally be driven through a relaxation homotopy.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .nlp_assembly import ScaledProblem, scale as nlp_scale
from .progress import ProgressVariables
from .solution import Solution

__all__ = ["SolverStatus", "SolverOptions", "SolveReport", "solve", "solve_homotopy", "solve_raw"]


class SolverStatus(enum.Enum):
    OPTIMAL = "Optimal"
    LOCALLY_INFEASIBLE = "LocallyInfeasible"
    ITERATION_LIMIT = "IterationLimit"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class SolverOptions:
    kkt_tolerance: float = 1e-6
    max_iterations: int = 2000
    mu_init: float = 1e-3
    mu_reduction: float = 0.2  # kappa_mu
    mu_power: float = 1.5  # theta for superlinear decrease
    regularization_floor: float = 1e-11
    eps_relax: tuple[float, ...] = (1e-2, 1e-4, 0.0)
    bound_push: float = 1e-2
    auto_scale: bool = True
    max_wall_time: float | None = None
    trace_path: str | None = None

    def __post_init__(self):
        if self.kkt_tolerance <= 0:
            raise ValueError("kkt_tolerance must be positive")
        sched = tuple(self.eps_relax)
        if any(b > a for a, b in zip(sched, sched[1:])) or (sched and sched[-1] != 0.0):
            raise ValueError("eps_relax must be nonincreasing and end at 0")


@dataclass
class SolveReport:
    status: SolverStatus
    iterations: int
    stationarity: float
    primal_feasibility: float
    complementarity: float
    wall_time: float
    message: str = ""
    stage: int = 0  # homotopy stage index (0 for plain solves)

    @property
    def success(self) -> bool:
        return self.status is SolverStatus.OPTIMAL


class _Ipm:
    """One interior-point solve on the slack-augmented problem."""

    KAPPA_EPS = 10.0
    KAPPA_SIGMA = 1e10
    TAU_MIN = 0.99
    GAMMA_THETA = 1e-5
    GAMMA_PHI = 1e-5
    ETA_PHI = 1e-8
    S_THETA = 1.1
    S_PHI = 2.3
    DELTA_SW = 1.0
    ALPHA_MIN = 1e-11
    MAX_SOC = 3
    THETA_MAX_FACTOR = 1e4
    REST_ACCEPT = 0.9
    REST_RESET_Z = False

    def __init__(self, problem, opts: SolverOptions):
        self.p = problem
        self.opts = opts
        self.n = problem.n_var
        self.m = problem.n_con
        lo, hi = problem.con_lo, problem.con_hi
        self.ranged = np.flatnonzero(hi > lo)
        self.eq_target = np.where(hi > lo, 0.0, lo)
        self.nr = len(self.ranged)
        self.ntot = self.n + self.nr
        self.lb = np.concatenate([problem.lb, lo[self.ranged]])
        self.ub = np.concatenate([problem.ub, hi[self.ranged]])
        self.has_l = np.isfinite(self.lb)
        self.has_u = np.isfinite(self.ub)
        self.grad = np.zeros(self.ntot)
        self.grad[: self.n] = problem.cost_gradient(np.zeros(self.n))
        if self.nr:
            self.sel = sp.csr_matrix(
                (-np.ones(self.nr), (self.ranged, np.arange(self.nr))), shape=(self.m, self.nr)
            )
        else:
            self.sel = None
        self.trace_rows: list[str] = []
        self._last_lu = None
        self._perm = self._kkt_permutation()
        if self._perm is not None:
            nk = self.ntot + self.m
            self._P = sp.csr_matrix(
                (np.ones(nk), (np.arange(nk), self._perm)), shape=(nk, nk)
            )

    def _kkt_permutation(self) -> np.ndarray | None:
        """Node-interleaved symmetric KKT ordering, dense time column last.

        Keeps the factorization banded under pure diagonal pivoting; falls
        back to None (COLAMD ordering) when the problem lacks the expected
        grid structure.
        """
        p = self.p
        if not hasattr(p, "grid") or not hasattr(p, "block_offsets"):
            return None
        g = p.grid
        off = p.block_offsets
        n, m = self.n, self.m
        N, M = g.node_count, g.waypoint_count
        sd = g.state_dim
        # slack column for ranged row i: ntot-n offset via position in self.ranged
        slack_of = {int(r): self.n + j for j, r in enumerate(self.ranged)}

        def rows_with_slacks(row_ids):
            out = []
            for r in row_ids:
                if r in slack_of:
                    out.append(slack_of[r])
                out.append(self.ntot + r)
            return out

        perm: list[int] = []
        a, b = off["initial"]
        perm += rows_with_slacks(range(a, b))
        a_dyn, _ = off["dynamics"]
        a_prog, _ = off["progress"]
        a_cpc, _ = off["cpc"]
        a_seq, b_seq = off["sequencing"]
        a_nrm, b_nrm = off["input_norm"]
        for k in range(N):
            s = g.state_slice(k)
            perm += list(range(s.start, s.start + g.node_stride))
            rows = list(range(a_dyn + sd * k, a_dyn + sd * (k + 1)))
            rows += list(range(a_prog + M * k, a_prog + M * (k + 1)))
            rows += list(range(a_cpc + M * k, a_cpc + M * (k + 1)))
            if b_seq > a_seq:
                rows += list(range(a_seq + (M - 1) * k, a_seq + (M - 1) * (k + 1)))
            if b_nrm > a_nrm:
                rows.append(a_nrm + k)
            perm += rows_with_slacks(rows)
        sN = g.state_slice(N)
        perm += list(range(sN.start, n))
        a, b = off["boundary"]
        perm += rows_with_slacks(range(a, b))
        a, b = off["end_state"]
        perm += rows_with_slacks(range(a, b))
        perm.append(g.idx_time)
        arr = np.asarray(perm, dtype=np.int64)
        if len(arr) != self.ntot + m or len(np.unique(arr)) != len(arr):
            return None
        return arr

    # -- residual helpers ---------------------------------------------------

    def _ctilde(self, c: np.ndarray, xt: np.ndarray) -> np.ndarray:
        out = c - self.eq_target
        if self.nr:
            out[self.ranged] -= xt[self.n :]
        return out

    def _jac_aug(self, J: sp.csr_matrix) -> sp.csr_matrix:
        if self.nr:
            return sp.hstack([J, self.sel], format="csr")
        return J

    def _slack_dist(self, xt: np.ndarray):
        dl = np.where(self.has_l, xt - self.lb, 1.0)
        du = np.where(self.has_u, self.ub - xt, 1.0)
        return dl, du

    def _phi(self, xt: np.ndarray, mu: float) -> float:
        dl, du = self._slack_dist(xt)
        if np.any(dl[self.has_l] <= 0) or np.any(du[self.has_u] <= 0):
            return np.inf
        val = float(self.grad @ xt)
        if mu > 0:
            val -= mu * np.sum(np.log(dl[self.has_l]))
            val -= mu * np.sum(np.log(du[self.has_u]))
        return val

    def _theta(self, ct: np.ndarray) -> float:
        return float(np.sum(np.abs(ct)))

    def _eval_ct(self, xt: np.ndarray) -> np.ndarray | None:
        try:
            c = self.p.eval_constraints(xt[: self.n])
        except Exception:
            return None
        return self._ctilde(c, xt)

    # -- main loop ----------------------------------------------------------

    def run(self, x0: np.ndarray, y0: np.ndarray | None, max_iter: int, t_start: float):
        opts = self.opts
        n, m = self.n, self.m

        xt = np.empty(self.ntot)
        xt[:n] = self._push_inside(np.asarray(x0, dtype=float), self.lb[:n], self.ub[:n])
        c0 = self.p.eval_constraints(xt[:n])
        if self.nr:
            xt[n:] = self._push_inside(c0[self.ranged], self.lb[n:], self.ub[n:])

        mu = opts.mu_init
        dl, du = self._slack_dist(xt)
        zl = np.where(self.has_l, mu / dl, 0.0)
        zu = np.where(self.has_u, mu / du, 0.0)

        y = None if y0 is None else np.asarray(y0, dtype=float).copy()

        delta_last = 0.0
        it = 0
        n_fail = 0
        status = SolverStatus.ITERATION_LIMIT
        message = ""
        errs = (np.inf, np.inf, np.inf)
        theta0 = self._theta(self._ctilde(c0, xt))
        # keep the filter from wandering far from the initial feasibility
        # level: the catalog guesses are decent, and the complementarity
        # structure makes far-from-feasible regions hopeless to return from
        theta_max = self.THETA_MAX_FACTOR * max(1.0, theta0)
        theta_min = 1e-4 * max(1.0, theta0)
        filt: list[tuple[float, float]] = []

        while it < max_iter:
            if opts.max_wall_time is not None and time.perf_counter() - t_start > opts.max_wall_time:
                message = "wall-time budget exhausted"
                break
            try:
                y_eval = np.zeros(m) if y is None else y
                c, J, H = self.p.eval_kkt_data(xt[:n], y_eval)
            except Exception as exc:
                status = SolverStatus.NUMERICAL_FAILURE
                message = f"evaluation failed at iteration {it}: {exc}"
                break
            ct = self._ctilde(c, xt)
            Ja = self._jac_aug(J)
            dl, du = self._slack_dist(xt)

            if y is None:
                y = self._least_squares_y(Ja, dl, du, zl, zu)
                continue  # re-evaluate H with the estimated multipliers

            r_dual = self.grad + Ja.T @ y - np.where(self.has_l, zl, 0.0) + np.where(self.has_u, zu, 0.0)
            comp_l = np.where(self.has_l, zl * dl, 0.0)
            comp_u = np.where(self.has_u, zu * du, 0.0)

            s_d = max(
                100.0,
                (np.sum(np.abs(y)) + np.sum(np.abs(zl)) + np.sum(np.abs(zu))) / max(1, m + self.ntot),
            ) / 100.0
            err_stat = np.max(np.abs(r_dual)) / s_d
            err_feas = np.max(np.abs(ct)) if m else 0.0
            err_comp0 = max(
                np.max(comp_l[self.has_l], initial=0.0),
                np.max(comp_u[self.has_u], initial=0.0),
            ) / s_d
            errs = (err_stat, err_feas, err_comp0)
            if max(err_stat, err_feas) <= opts.kkt_tolerance and err_comp0 <= 1e2 * opts.kkt_tolerance:
                status = SolverStatus.OPTIMAL
                break

            # monotone barrier update; reset the filter when mu drops
            mu_old = mu
            while True:
                err_comp_mu = max(
                    np.max(np.abs(comp_l[self.has_l] - mu), initial=0.0),
                    np.max(np.abs(comp_u[self.has_u] - mu), initial=0.0),
                ) / s_d
                if max(err_stat, err_feas, err_comp_mu) > self.KAPPA_EPS * mu or mu <= opts.kkt_tolerance / self.KAPPA_EPS:
                    break
                mu = max(opts.kkt_tolerance / self.KAPPA_EPS, min(opts.mu_reduction * mu, mu**opts.mu_power))
            if mu != mu_old:
                filt.clear()
            tau = max(self.TAU_MIN, 1.0 - mu)

            dls = np.maximum(dl, 1e-300)
            dus = np.maximum(du, 1e-300)
            sigma = np.where(self.has_l, zl / dls, 0.0) + np.where(self.has_u, zu / dus, 0.0)
            r_x = self.grad + Ja.T @ y
            r_x -= np.where(self.has_l, mu / dls, 0.0)
            r_x += np.where(self.has_u, mu / dus, 0.0)

            Ha = sp.bmat(
                [[H, None], [None, sp.csr_matrix((self.nr, self.nr))]], format="csr"
            ) if self.nr else H

            step = self._solve_kkt(Ha, sigma, Ja, r_x, ct, delta_last)
            if step is None:
                status = SolverStatus.NUMERICAL_FAILURE
                message = f"KKT factorization failed at iteration {it}"
                break
            dx, dy, delta_last = step

            dzl = np.where(self.has_l, (mu - zl * dl) / dls - (zl / dls) * dx, 0.0)
            dzu = np.where(self.has_u, (mu - zu * du) / dus + (zu / dus) * dx, 0.0)

            alpha_max = self._ftb(dl, du, dx, tau)
            alpha_z = min(self._ftb_dual(zl, dzl, tau), self._ftb_dual(zu, dzu, tau))

            phi0 = self._phi(xt, mu)
            theta_k = self._theta(ct)
            grad_phi = self.grad - np.where(self.has_l, mu / dls, 0.0) + np.where(self.has_u, mu / dus, 0.0)
            dphi = float(grad_phi @ dx)

            alpha, xt_new, augment = self._filter_search(
                xt, dx, alpha_max, mu, phi0, theta_k, dphi, ct, filt, theta_max, theta_min
            )

            if alpha is None:
                # restoration: damped Gauss-Newton pull toward feasibility
                xt_res = self._restoration(xt, ct, Ja, tau, theta_k)
                if xt_res is None:
                    n_fail += 1
                    if n_fail >= 5:
                        status = (
                            SolverStatus.LOCALLY_INFEASIBLE
                            if err_feas > np.sqrt(opts.kkt_tolerance)
                            else SolverStatus.NUMERICAL_FAILURE
                        )
                        message = "line search and restoration failed repeatedly"
                        break
                    # take the largest harmless fraction and force extra regularization
                    alpha = min(alpha_max, 1e-4)
                    xt = xt + alpha * dx
                    y = y + alpha * dy
                else:
                    n_fail = 0
                    # keep strictly interior after the feasibility pull
                    tiny = 1e-12 * np.maximum(1.0, np.abs(xt_res))
                    xt = np.clip(xt_res, self.lb + tiny, self.ub - tiny)
                    filt.clear()
                    if self.REST_RESET_Z:
                        # the feasibility pull invalidates the bound
                        # multipliers; restart them on the central path
                        dl, du = self._slack_dist(xt)
                        zl = np.where(self.has_l, mu / np.maximum(dl, 1e-300), 0.0)
                        zu = np.where(self.has_u, mu / np.maximum(du, 1e-300), 0.0)
                dl, du = self._slack_dist(xt)
                zl, zu = self._z_safeguard(zl, zu, dl, du, mu)
                it += 1
                continue

            n_fail = 0
            if augment:
                filt.append(((1 - self.GAMMA_THETA) * theta_k, phi0 - self.GAMMA_PHI * theta_k))

            xt = xt_new
            y = y + alpha * dy
            zl = zl + alpha_z * dzl
            zu = zu + alpha_z * dzu
            dl, du = self._slack_dist(xt)
            zl, zu = self._z_safeguard(zl, zu, dl, du, mu)

            if self.opts.trace_path:
                self.trace_rows.append(
                    f"{it},{xt[0]:.9g},{err_feas:.6g},{err_stat:.6g},{mu:.6g},{alpha:.6g}"
                )
            it += 1

        if y is None:
            y = np.zeros(m)
        return xt[: self.n], y, it, status, errs, message

    # -- pieces -------------------------------------------------------------

    def _z_safeguard(self, zl, zu, dl, du, mu):
        dl = np.maximum(dl, 1e-300)
        du = np.maximum(du, 1e-300)
        zl = np.where(self.has_l, np.clip(zl, mu / (self.KAPPA_SIGMA * dl), self.KAPPA_SIGMA * mu / dl), 0.0)
        zu = np.where(self.has_u, np.clip(zu, mu / (self.KAPPA_SIGMA * du), self.KAPPA_SIGMA * mu / du), 0.0)
        return zl, zu

    def _push_inside(self, v: np.ndarray, lb: np.ndarray, ub: np.ndarray) -> np.ndarray:
        kappa = self.opts.bound_push
        out = v.copy()
        fl, fu = np.isfinite(lb), np.isfinite(ub)
        width = np.where(fl & fu, ub - lb, np.inf)
        pl = np.where(fl, np.minimum(kappa * np.maximum(1.0, np.abs(lb)), 0.25 * width), 0.0)
        pu = np.where(fu, np.minimum(kappa * np.maximum(1.0, np.abs(ub)), 0.25 * width), 0.0)
        out = np.where(fl, np.maximum(out, lb + pl), out)
        out = np.where(fu, np.minimum(out, ub - pu), out)
        return out

    def _least_squares_y(self, Ja, dl, du, zl, zu) -> np.ndarray:
        """Initial equality multipliers minimizing the dual residual."""
        r = self.grad - np.where(self.has_l, zl, 0.0) + np.where(self.has_u, zu, 0.0)
        K = sp.bmat(
            [[sp.identity(self.ntot), Ja.T], [Ja, -1e-8 * sp.identity(self.m)]], format="csc"
        )
        solve = self._factor(K)
        if solve is not None:
            sol = solve(np.concatenate([-r, np.zeros(self.m)]))
            if sol is not None:
                y = sol[self.ntot :]
                if np.all(np.isfinite(y)) and np.max(np.abs(y), initial=0.0) <= 1e3:
                    return y
        return np.zeros(self.m)

    def _ftb(self, dl, du, dx, tau):
        alpha = 1.0
        neg = self.has_l & (dx < 0)
        if np.any(neg):
            alpha = min(alpha, np.min(-tau * dl[neg] / dx[neg]))
        pos = self.has_u & (dx > 0)
        if np.any(pos):
            alpha = min(alpha, np.min(tau * du[pos] / dx[pos]))
        return alpha

    @staticmethod
    def _ftb_dual(z, dz, tau):
        mask = (dz < 0) & (z > 0)
        if np.any(mask):
            return min(1.0, float(np.min(-tau * z[mask] / dz[mask])))
        return 1.0

    def _factor(self, K: sp.csc_matrix):
        """Factor K, preferring the banded node-interleaved ordering.

        Returns a solve(rhs) closure, or None if K cannot be factored at
        all.  The banded pivot-free factorization is corrected by iterative
        refinement; rhs instances it cannot refine fall back to a lazily
        computed COLAMD factorization.
        """
        state = {"colamd": None, "failed": False}

        def colamd_solve(rhs):
            if state["colamd"] is None and not state["failed"]:
                try:
                    state["colamd"] = spla.splu(K.tocsc(), permc_spec="COLAMD")
                except (RuntimeError, ValueError):
                    state["failed"] = True
            if state["colamd"] is None:
                return None
            out = state["colamd"].solve(rhs)
            return out if np.all(np.isfinite(out)) else None

        lu = None
        if self._perm is not None:
            Kp = (self._P @ K @ self._P.T).tocsc()
            try:
                lu = spla.splu(
                    Kp, permc_spec="NATURAL", diag_pivot_thresh=0.0,
                    options={"SymmetricMode": True},
                )
            except (RuntimeError, ValueError):
                lu = None
        if lu is None:
            probe = colamd_solve(np.zeros(K.shape[0]))
            return colamd_solve if probe is not None else None

        def solve(rhs, _lu=lu, _K=K):
            v = _lu.solve(rhs[self._perm])
            out = np.empty_like(v)
            out[self._perm] = v
            if not np.all(np.isfinite(out)):
                return colamd_solve(rhs)
            # refinement recovers the accuracy lost to pivot-free elimination
            scale_ref = max(1.0, np.max(np.abs(rhs)))
            for _ in range(4):
                r = rhs - _K @ out
                if np.max(np.abs(r)) <= 1e-10 * scale_ref:
                    return out
                v = _lu.solve(r[self._perm])
                corr = np.empty_like(v)
                corr[self._perm] = v
                if not np.all(np.isfinite(corr)):
                    return colamd_solve(rhs)
                out += corr
            r = rhs - _K @ out
            if np.max(np.abs(r)) > 1e-7 * scale_ref:
                return colamd_solve(rhs)
            return out

        return solve

    def _solve_kkt(self, Ha, sigma, Ja, r_x, ct, delta_last):
        """Factor and solve the regularized KKT system; inertia-free test."""
        opts = self.opts
        delta_c = 1e-8
        rhs = np.concatenate([-r_x, -ct])
        delta = 0.0 if delta_last == 0.0 else max(opts.regularization_floor, delta_last / 3.0)
        for _ in range(40):
            Wd = Ha + sp.diags(sigma + delta)
            K = sp.bmat([[Wd, Ja.T], [Ja, -delta_c * sp.identity(self.m)]], format="csc")
            solve = self._factor(K)
            sol = solve(rhs) if solve is not None else None
            if sol is not None and np.all(np.isfinite(sol)):
                dx = sol[: self.ntot]
                curv = dx @ (Wd @ dx)
                if curv >= 1e-11 * max(1.0, dx @ dx):
                    self._last_lu = solve
                    return dx, sol[self.ntot :], delta
            delta = max(10.0 * delta, 1e-8) if delta > 0 else max(opts.regularization_floor, 1e-8)
            if delta > 1e12:
                return None
        return None

    # -- filter line search ---------------------------------------------------

    def _acceptable(self, theta, phi, theta_k, phi_k, filt) -> bool:
        for th_j, ph_j in filt:
            if theta >= th_j and phi >= ph_j:
                return False
        return (
            theta <= (1 - self.GAMMA_THETA) * theta_k
            or phi <= phi_k - self.GAMMA_PHI * theta_k
        )

    def _filter_search(self, xt, dx, alpha_max, mu, phi0, theta_k, dphi, ct, filt, theta_max, theta_min):
        """Backtracking filter line search with second-order corrections.

        Returns (alpha, new iterate, augment-filter flag) or (None, None, False).
        """
        alpha = alpha_max
        soc_count = 0
        theta_last_soc = np.inf
        for _ in range(55):
            xt_try = xt + alpha * dx
            ct_try = self._eval_ct(xt_try)
            if ct_try is not None:
                theta_try = self._theta(ct_try)
                phi_try = self._phi(xt_try, mu)
                if theta_try <= theta_max and np.isfinite(phi_try):
                    switching = (
                        dphi < 0
                        and alpha * (-dphi) ** self.S_PHI > self.DELTA_SW * theta_k**self.S_THETA
                        and theta_k <= theta_min
                    )
                    if switching:
                        if phi_try <= phi0 + self.ETA_PHI * alpha * dphi:
                            return alpha, xt_try, False
                    elif self._acceptable(theta_try, phi_try, theta_k, phi0, filt):
                        return alpha, xt_try, True
                # second-order corrections at the first (largest) trial only
                if (
                    alpha == alpha_max
                    and soc_count < self.MAX_SOC
                    and theta_try is not None
                    and theta_try >= theta_k
                    and theta_try < theta_last_soc
                    and self._last_lu is not None
                ):
                    theta_last_soc = theta_try
                    soc_count += 1
                    rhs = np.concatenate([np.zeros(self.ntot), -(alpha * ct + ct_try)])
                    try:
                        sol = self._last_lu(rhs)
                    except (RuntimeError, ValueError):
                        sol = None
                    if sol is not None and np.all(np.isfinite(sol)):
                        dx_soc = dx + sol[: self.ntot]
                        dl, du = self._slack_dist(xt)
                        a_soc = self._ftb(dl, du, dx_soc, max(self.TAU_MIN, 1.0 - mu))
                        xt_soc = xt + a_soc * dx_soc
                        ct_soc = self._eval_ct(xt_soc)
                        if ct_soc is not None:
                            th_soc = self._theta(ct_soc)
                            ph_soc = self._phi(xt_soc, mu)
                            if th_soc <= theta_max and np.isfinite(ph_soc):
                                switching = (
                                    dphi < 0
                                    and a_soc * (-dphi) ** self.S_PHI > self.DELTA_SW * theta_k**self.S_THETA
                                    and theta_k <= theta_min
                                )
                                if switching and ph_soc <= phi0 + self.ETA_PHI * a_soc * dphi:
                                    return a_soc, xt_soc, False
                                if not switching and self._acceptable(th_soc, ph_soc, theta_k, phi0, filt):
                                    return a_soc, xt_soc, True
                        continue  # retry SOC with updated theta_last_soc
            alpha *= 0.5
            if alpha < self.ALPHA_MIN:
                return None, None, False
        return None, None, False

    def _restoration(self, xt, ct, Ja, tau, theta_k):
        """Damped Gauss-Newton on 0.5 ||c~||^2 inside the box.

        Each step minimizes ||J dx + c||^2 + lam ||dx||^2 through the
        augmented system [[lam I, J^T], [J, -I]] (much better conditioned
        than the explicit normal equations); lam adapts Levenberg-style.
        """
        x = xt.copy()
        c = ct.copy()
        J = Ja
        lam = 1e-6
        zero = np.zeros(self.ntot)
        for _ in range(30):
            K = sp.bmat(
                [[lam * sp.identity(self.ntot), J.T], [J, -sp.identity(self.m)]],
                format="csc",
            )
            try:
                sol = spla.splu(K, permc_spec="COLAMD").solve(np.concatenate([zero, -c]))
            except (RuntimeError, ValueError):
                return None
            dx = sol[: self.ntot]
            if not np.all(np.isfinite(dx)):
                return None
            dl, du = self._slack_dist(x)
            a = min(1.0, self._ftb(dl, du, dx, tau))
            x_try = x + a * dx
            c_try = self._eval_ct(x_try)
            if c_try is None or self._theta(c_try) >= self._theta(c):
                lam = max(lam, 1e-8) * 10.0
                if lam > 1e10:
                    break
                continue
            x, c = x_try, c_try
            lam = max(lam / 10.0, 1e-8)
            if self._theta(c) <= 0.1 * theta_k:
                break
            try:
                J = self._jac_aug(self.p.eval_jacobian(x[: self.n]))
            except Exception:
                break
        if self._theta(c) < self.REST_ACCEPT * theta_k:
            return x
        return None


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------


def solve_raw(problem, x0, opts: SolverOptions | None = None, y0=None):
    """Interior-point solve returning the raw stationary point.

    Returns (x, y, report).  Deterministic for identical inputs.
    """
    opts = opts or SolverOptions()
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (problem.n_var,):
        raise ValueError(f"initial guess has shape {x0.shape}, expected ({problem.n_var},)")
    if not np.all(np.isfinite(x0)):
        raise ValueError("initial guess contains non-finite entries")
    rec = None
    work = problem
    if opts.auto_scale and not isinstance(problem, ScaledProblem):
        work, rec = nlp_scale(problem)
        x0 = rec.scale_x(x0)
        if y0 is not None:
            y0 = np.asarray(y0, dtype=float) / rec.c_scale
    t0 = time.perf_counter()
    ipm = _Ipm(work, opts)
    x, y, iters, status, errs, message = ipm.run(x0, y0, opts.max_iterations, t0)
    wall = time.perf_counter() - t0
    if rec is not None:
        x = rec.unscale_x(x)
        y = y * rec.c_scale
    report = SolveReport(
        status=status,
        iterations=iters,
        stationarity=float(errs[0]),
        primal_feasibility=float(errs[1]),
        complementarity=float(errs[2]),
        wall_time=wall,
        message=message,
    )
    if opts.trace_path:
        with open(opts.trace_path, "w") as fh:
            fh.write("iteration,cost,primal_infeasibility,dual_infeasibility,barrier,step_length\n")
            fh.write("\n".join(ipm.trace_rows) + ("\n" if ipm.trace_rows else ""))
    return x, y, report


def _solution_from_x(problem, x) -> Solution:
    t, states, inputs, lam, mu, nu = problem.split(x)
    prog = ProgressVariables(lam=lam, mu=mu, nu=nu)
    meta = {
        "model": problem.model,
        "node_count": problem.grid.node_count,
        "waypoint_count": problem.grid.waypoint_count,
        "d_tol": float(np.min(problem.d_tol)),
    }
    return Solution(total_time=t, states=states, inputs=inputs, progress=prog, metadata=meta)


def solve(problem, x0, opts: SolverOptions | None = None, y0=None):
    """Solve the NLP and package the result as a Solution + report."""
    x, y, report = solve_raw(problem, x0, opts, y0)
    return _solution_from_x(problem, x), report


def _pass_mask(problem, x) -> np.ndarray:
    """Classify complementarity rows: pass (d^2 = nu) vs no-change (mu = 0).

    Exactly one pass node per waypoint: the unit progress drop can always be
    carried by a single node inside the tolerance ball, so pinning more than
    one node over-constrains the path.  The node with the largest progress
    rate in the relaxed solution is the natural choice.
    """
    _, _, _, _, mu, _ = problem.split(x)
    mask = np.zeros_like(mu, dtype=bool)
    for j in range(mu.shape[1]):
        mask[np.argmax(mu[:, j]), j] = True
    return mask


def solve_homotopy(problem, x0, opts: SolverOptions | None = None):
    """Solve through the complementarity relaxation schedule.

    Each stage solves the problem with |mu (d^2 - nu)| <= eps, warm-starting
    the next stage; the final stage (eps = 0) is the exact problem.
    """
    opts = opts or SolverOptions()
    x = np.asarray(x0, dtype=float)
    y = None
    total_iters = 0
    report = None
    skipped: list[str] = []
    for stage, eps in enumerate(opts.eps_relax):
        if eps > 0:
            stage_problem = problem.relaxed_copy(eps)
        elif stage == 0:
            # schedule (0,) is by definition the plain solve: no relaxed
            # solution exists yet to derive a pass mask from
            stage_problem = problem
        else:
            # exact complementarity is degenerate (vanishing row gradients
            # wherever mu and d^2 - nu are both zero); split each row into
            # its smooth branch using the relaxed solution as the guess
            stage_problem = problem.polished_copy(_pass_mask(problem, x))
        stage_opts = opts
        if stage > 0:
            # warm starts resume near the central path; restart the barrier low
            stage_opts = replace(opts, mu_init=min(opts.mu_init, 1e-3))
        x_new, y_new, report = solve_raw(stage_problem, x, stage_opts, y0=y)
        total_iters += report.iterations
        report.stage = stage
        if report.success:
            x, y = x_new, y_new
        elif stage < len(opts.eps_relax) - 1:
            # a tighter relaxation can be unsolvable as an intermediate
            # (constraint qualification degrades as eps -> 0); discard the
            # failed attempt and let the next stage start from the last
            # good iterate
            skipped.append(f"stage {stage} (eps={eps:g}): {report.status.value}")
            continue
        else:
            report.message = f"homotopy stage {stage} (eps={eps:g}) failed: {report.message}"
            break
    if report.success and skipped:
        report.message = "recovered past failed stages [" + "; ".join(skipped) + "]"
    report.iterations = total_iters
    return _solution_from_x(problem, x), report
