"""Unit tests for NLP assembly: counts, residuals, derivatives, scaling."""

import numpy as np
import pytest
import scipy.sparse as sp

from cpcopt.nlp_assembly import (
    BuildOptions,
    ConfigurationError,
    CpcProblem,
    EvaluationError,
    ScalingRecord,
    build,
    default_scaling,
    scale,
)
from cpcopt.progress import EndConditions
from cpcopt.quad_model import dynamics_core, named_config, point_mass_core, reduced_dynamics_core
from cpcopt.transcription import rk4_step

from conftest import consistent_point, make_problem, make_track


def naive_constraints(problem, x):
    """Straightforward per-equation reference evaluator (independent path)."""
    g = problem.grid
    N, M = g.node_count, g.waypoint_count
    t, states, inputs, lam, mu, nu = problem.split(x)
    dt = t / N
    cfg = problem.cfg
    off = problem.block_offsets
    c = np.zeros(problem.n_con)

    a, b = off["initial"]
    c[a:b] = states[0] - problem.x_init

    if problem.model == "full":
        f = lambda s, u: np.array(dynamics_core(s, u, cfg))
    elif problem.model == "reduced":
        f = lambda s, u: np.array(reduced_dynamics_core(s, u, cfg))
    else:
        f = lambda s, u: np.array(point_mass_core(s, u))
    a, _ = off["dynamics"]
    sd = g.state_dim
    for k in range(N):
        pred = rk4_step(f, states[k], inputs[k], dt)
        if problem.model == "reduced":
            pred[10:13] = inputs[k][1:4]
        c[a + k * sd : a + (k + 1) * sd] = states[k + 1] - pred

    a, _ = off["progress"]
    for k in range(N):
        c[a + k * M : a + (k + 1) * M] = lam[k + 1] - (lam[k] - mu[k])

    a, b = off["boundary"]
    c[a : a + M] = lam[0] - 1.0
    c[a + M : b] = lam[N]

    a, b = off["end_state"]
    rows = []
    ec = problem.track.end_conditions
    xN = states[-1]
    if problem.model == "point_mass":
        if ec.velocity_zero:
            rows.append(xN[3:6])
    else:
        if ec.velocity_zero:
            rows.append(xN[7:10])
        if ec.attitude_identity:
            rows.append(xN[4:7])
        if ec.bodyrate_zero:
            rows.append(xN[10:13])
    if problem.options.fix_last_waypoint:
        rows.append(xN[0:3] - problem.waypoints[-1])
    if rows:
        c[a:b] = np.concatenate(rows)

    a, b = off["input_norm"]
    if b > a:
        for k in range(N):
            c[a + k] = inputs[k] @ inputs[k] - problem.options.a_max**2

    a, b = off["sequencing"]
    if b > a:
        for k in range(N):
            for j in range(M - 1):
                c[a + k * (M - 1) + j] = lam[k, j] - lam[k, j + 1]

    a, b = off["cpc"]
    for k in range(N):
        for j in range(M):
            d2 = np.sum((states[k, 0:3] - problem.waypoints[j]) ** 2)
            c[a + k * M + j] = mu[k, j] * (d2 - nu[k, j])
    return c


def fd_jacobian(problem, x, h=1e-6):
    n = x.size
    J = np.zeros((problem.n_con, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        J[:, i] = (problem.eval_constraints(x + e) - problem.eval_constraints(x - e)) / (2 * h)
    return J


class TestBuild:
    def test_variable_count_single_waypoint(self):
        p = make_problem(node_count=10)
        assert p.n_var == 215

    def test_sequencing_rows_two_waypoints(self):
        p = make_problem(waypoints=[[2, 0, 0], [4, 0, 0]], node_count=10)
        a, b = p.block_offsets["sequencing"]
        assert b - a == 10

    def test_hover_end_adds_six_rows(self):
        free = make_problem(node_count=8)
        hover = make_problem(node_count=8, end=EndConditions.hover())
        a, b = hover.block_offsets["end_state"]
        assert b - a == 6
        assert hover.n_con == free.n_con + 6

    def test_build_function_matches_constructor(self):
        track = make_track([[4, 0, 0]])
        cfg = named_config("standard")
        opts = BuildOptions(node_count=6, d_tol=0.3)
        assert build(track, cfg, opts).n_con == CpcProblem(track, cfg, opts).n_con

    def test_unknown_model_raises(self):
        with pytest.raises(ConfigurationError):
            make_problem(model="quintic")

    def test_point_mass_requires_a_max(self):
        with pytest.raises(ConfigurationError):
            make_problem(model="point_mass")

    def test_bounds_reflect_config(self):
        p = make_problem(node_count=6)
        g = p.grid
        us = g.input_slice(0)
        np.testing.assert_allclose(p.lb[us], p.cfg.thrust_min)
        np.testing.assert_allclose(p.ub[us], p.cfg.thrust_max)
        ms = g.mu_slice(0)
        np.testing.assert_allclose(p.lb[ms], 0.0)
        np.testing.assert_allclose(p.ub[ms], 1.0)
        ns = g.nu_slice(0)
        np.testing.assert_allclose(p.ub[ns], p.d_tol**2)
        assert p.lb[g.idx_time] == pytest.approx(p.options.t_min)

    def test_stats_json_friendly(self):
        import json

        stats = make_problem(node_count=5).stats()
        json.dumps(stats)
        assert stats["n_var"] == make_problem(node_count=5).n_var


class TestConstraintValues:
    @pytest.mark.parametrize("model", ["full", "reduced", "point_mass"])
    def test_exact_rollout_has_zero_defects(self, model, rng):
        kwargs = {"a_max": 5.0} if model == "point_mass" else {}
        p = make_problem(node_count=8, model=model, **kwargs)
        x = consistent_point(p, rng)
        c = p.eval_constraints(x)
        for name in ("initial", "dynamics", "progress", "boundary"):
            a, b = p.block_offsets[name]
            np.testing.assert_allclose(c[a:b], 0.0, atol=1e-12)

    def test_hover_point_feasible(self):
        p = make_problem(waypoints=[[0.0, 0.0, 0.0]], node_count=6, d_tol=0.3)
        g = p.grid
        N = g.node_count
        states = np.tile(p.x_init, (N + 1, 1))
        inputs = np.full((N, 4), p.cfg.hover_thrust)
        lam = np.vstack([np.ones((1, 1)), np.zeros((N, 1))])
        mu = np.zeros((N, 1))
        mu[0, 0] = 1.0
        nu = np.zeros((N, 1))
        x = g.pack(2.0, states, inputs, lam, mu, nu)
        c = p.eval_constraints(x)
        assert np.all(c >= p.con_lo - 1e-9) and np.all(c <= p.con_hi + 1e-9)

    @pytest.mark.parametrize("model", ["full", "reduced", "point_mass"])
    def test_matches_naive_evaluator(self, model, rng):
        kwargs = {"a_max": 5.0} if model == "point_mass" else {}
        p = make_problem(
            waypoints=[[2, 0, 1], [4, 1, 0]],
            node_count=7,
            model=model,
            end=EndConditions.hover() if model != "point_mass" else EndConditions(velocity_zero=True),
            **kwargs,
        )
        for _ in range(3):
            x = consistent_point(p, rng) + 0.05 * rng.standard_normal(p.n_var)
            np.testing.assert_allclose(p.eval_constraints(x), naive_constraints(p, x), atol=1e-13)

    def test_non_finite_input_reports_index(self):
        p = make_problem(node_count=5)
        x = np.zeros(p.n_var)
        x[0] = 1.0
        x[17] = np.nan
        with pytest.raises(EvaluationError) as exc:
            p.eval_constraints(x)
        assert 17 in np.atleast_1d(exc.value.indices)

    def test_translation_equivariance(self, rng):
        shift = np.array([3.0, -2.0, 5.0])
        p0 = make_problem(waypoints=[[2, 0, 1], [4, 1, 0]], node_count=6, end=EndConditions.hover())
        from cpcopt.progress import Track
        from cpcopt.quad_model import QuadState

        t0 = p0.track
        start = QuadState(
            t0.start_state.position + shift,
            t0.start_state.attitude,
            t0.start_state.velocity,
            t0.start_state.bodyrate,
        )
        track1 = Track(t0.waypoints + shift, t0.tolerance, start, t0.end_conditions)
        p1 = CpcProblem(track1, p0.cfg, p0.options)
        x = consistent_point(p0, rng) + 0.02 * rng.standard_normal(p0.n_var)
        x_shift = x.copy()
        g = p0.grid
        for k in range(g.node_count + 1):
            ss = g.state_slice(k)
            x_shift[ss.start : ss.start + 3] += shift
        np.testing.assert_allclose(p1.eval_constraints(x_shift), p0.eval_constraints(x), atol=1e-9)


class TestDerivatives:
    def test_cost_is_time_variable(self, rng):
        p = make_problem(node_count=5)
        x = consistent_point(p, rng)
        assert p.eval_cost(x) == x[0]
        grad = p.cost_gradient(x)
        assert grad[0] == 1.0 and np.count_nonzero(grad) == 1

    @pytest.mark.parametrize("model", ["full", "reduced", "point_mass"])
    def test_jacobian_matches_finite_differences(self, model, rng):
        kwargs = {"a_max": 5.0} if model == "point_mass" else {}
        p = make_problem(
            waypoints=[[2, 0, 1], [3, 1, 0]],
            node_count=4,
            model=model,
            end=EndConditions.hover() if model != "point_mass" else None,
            **kwargs,
        )
        for _ in range(2):
            x = consistent_point(p, rng) + 0.05 * rng.standard_normal(p.n_var)
            J = p.eval_jacobian(x).toarray()
            Jfd = fd_jacobian(p, x)
            scale_ref = np.maximum(np.abs(Jfd), 1.0)
            assert np.max(np.abs(J - Jfd) / scale_ref) < 1e-5

    def test_cpc_row_wrt_mu_is_squared_distance_residual(self, rng):
        p = make_problem(node_count=5, d_tol=0.3)
        x = consistent_point(p, rng)
        g = p.grid
        _, states, _, _, _, nu = p.split(x)
        J = p.eval_jacobian(x).toarray()
        a, _ = p.block_offsets["cpc"]
        for k in range(g.node_count):
            d2 = np.sum((states[k, 0:3] - p.waypoints[0]) ** 2)
            col = g.mu_slice(k).start
            assert J[a + k, col] == pytest.approx(d2 - nu[k, 0], rel=1e-12)

    def test_sparsity_pattern_is_superset(self, rng):
        p = make_problem(node_count=4, waypoints=[[1.5, 0, 0]], end=EndConditions.hover())
        rows, cols = p.jacobian_pattern
        declared = set(zip(rows.tolist(), cols.tolist()))
        x = consistent_point(p, rng) + 0.05 * rng.standard_normal(p.n_var)
        Jfd = fd_jacobian(p, x)
        nz = np.argwhere(np.abs(Jfd) > 1e-7)
        missing = [tuple(rc) for rc in nz if tuple(rc) not in declared]
        assert not missing

    def test_pattern_stable_across_evaluations(self, rng):
        p = make_problem(node_count=4)
        x1 = consistent_point(p, rng)
        x2 = consistent_point(p, rng, spread=0.2) + 0.1 * rng.standard_normal(p.n_var)
        J1, J2 = p.eval_jacobian(x1), p.eval_jacobian(x2)
        np.testing.assert_array_equal(J1.indices, J2.indices)
        np.testing.assert_array_equal(J1.indptr, J2.indptr)

    def test_lagrangian_hessian_matches_finite_differences(self, rng):
        p = make_problem(node_count=3)
        x = consistent_point(p, rng)
        y = rng.standard_normal(p.n_con)
        H = p.eval_lagrangian_hessian(x, y).toarray()
        h = 1e-5

        def grad_lag(xx):
            return p.eval_jacobian(xx).T @ y

        Hfd = np.zeros_like(H)
        for i in range(p.n_var):
            e = np.zeros(p.n_var)
            e[i] = h
            Hfd[:, i] = (grad_lag(x + e) - grad_lag(x - e)) / (2 * h)
        scale_ref = np.maximum(np.abs(Hfd), 1.0)
        assert np.max(np.abs(H - Hfd) / scale_ref) < 1e-4

    def test_relaxed_copy_widens_cpc_rows_only(self):
        p = make_problem(node_count=5)
        r = p.relaxed_copy(1e-2)
        a, b = p.block_offsets["cpc"]
        np.testing.assert_allclose(r.con_lo[a:b], -1e-2)
        np.testing.assert_allclose(r.con_hi[a:b], 1e-2)
        mask = np.ones(p.n_con, dtype=bool)
        mask[a:b] = False
        np.testing.assert_array_equal(r.con_lo[mask], p.con_lo[mask])
        np.testing.assert_array_equal(r.con_hi[mask], p.con_hi[mask])


class TestScaling:
    def test_identity_scaling_is_bitwise(self, rng):
        p = make_problem(node_count=5)
        record = ScalingRecord(x_scale=np.ones(p.n_var), c_scale=np.ones(p.n_con))
        sp_, _ = scale(p, record)
        x = consistent_point(p, rng)
        np.testing.assert_array_equal(sp_.eval_constraints(x), p.eval_constraints(x))
        assert sp_.eval_cost(x) == p.eval_cost(x)

    def test_unscaling_restores_residuals(self, rng):
        p = make_problem(waypoints=[[20, 0, 0]], node_count=6)
        sp_, record = scale(p)
        x = consistent_point(p, rng)
        xs = record.scale_x(x)
        np.testing.assert_allclose(record.unscale_x(xs), x, rtol=1e-15)
        cs = sp_.eval_constraints(xs)
        np.testing.assert_allclose(cs / record.c_scale, p.eval_constraints(x), atol=1e-12)

    def test_residuals_scale_by_recorded_factors(self, rng):
        p = make_problem(node_count=5)
        record = default_scaling(p)
        record = ScalingRecord(x_scale=record.x_scale, c_scale=np.full(p.n_con, 10.0))
        sp_, _ = scale(p, record)
        x = consistent_point(p, rng)
        np.testing.assert_allclose(
            sp_.eval_constraints(record.scale_x(x)),
            10.0 * p.eval_constraints(x),
            atol=1e-9,
        )

    def test_scaled_jacobian_consistent(self, rng):
        p = make_problem(waypoints=[[15, 0, 0]], node_count=4)
        sp_, record = scale(p)
        x = consistent_point(p, rng)
        xs = record.scale_x(x)
        J = sp_.eval_jacobian(xs).toarray()
        expected = (
            sp.diags(record.c_scale) @ p.eval_jacobian(x) @ sp.diags(record.x_scale)
        ).toarray()
        np.testing.assert_allclose(J, expected, atol=1e-12)
