"""Unit tests for the shooting grid layout, RK4 integrator, and defects."""

import math

import numpy as np
import pytest

from cpcopt.quad_model import dynamics_core, named_config
from cpcopt.transcription import ShootingGrid, defect, rk4_step


class TestRk4:
    def test_scalar_decay(self):
        # x' = -x, x(0) = 1, one step dt = 0.1: classic RK4 gives 0.9048375
        out = rk4_step(lambda x, u: -x, np.array([1.0]), np.array([0.0]), 0.1)
        assert out[0] == pytest.approx(0.9048375, abs=1e-9)

    def test_exact_on_cubics(self):
        # RK4 is exact for polynomial right-hand sides up to degree 3 in t;
        # integrate x' = u with constant u (trivially exact)
        out = rk4_step(lambda x, u: u, np.array([2.0]), np.array([3.0]), 0.5)
        assert out[0] == pytest.approx(3.5, abs=1e-14)

    def test_fifth_order_local_error(self):
        # halving dt shrinks the one-step error against a tightly resolved
        # reference by ~2^5 (nonlinear scalar ODE x' = x^2, x0 = 0.5)
        f = lambda x, u: x * x
        x0 = np.array([0.5])

        def ref(dt, substeps=1000):
            x = x0.copy()
            for _ in range(substeps):
                x = rk4_step(f, x, None, dt / substeps)
            return x

        errs = []
        for dt in (0.2, 0.1):
            errs.append(abs(rk4_step(f, x0, None, dt)[0] - ref(dt)[0]))
        ratio = errs[0] / errs[1]
        assert 20.0 < ratio < 45.0  # nominal 32


class TestDefect:
    def test_self_consistency(self):
        cfg = named_config("standard")
        f = lambda s, u: np.array(dynamics_core(s, u, cfg))
        rng = np.random.default_rng(7)
        q = rng.standard_normal(4)
        q /= np.linalg.norm(q)
        x_k = np.concatenate([rng.standard_normal(3), q, rng.standard_normal(6)])
        u_k = rng.uniform(0, 5, 4)
        dt = 0.01
        x_k1 = rk4_step(f, x_k, u_k, dt)
        np.testing.assert_allclose(defect(x_k, u_k, x_k1, dt, f), 0.0, atol=1e-15)

    def test_quaternion_norm_preserved_to_dt5(self):
        cfg = named_config("standard")
        f = lambda s, u: np.array(dynamics_core(s, u, cfg))
        x = np.concatenate([np.zeros(3), [1, 0, 0, 0], np.zeros(3), [6.0, -4.0, 2.0]])
        u = np.full(4, cfg.hover_thrust)
        for dt in (0.02, 0.01):
            x1 = rk4_step(f, x, u, dt)
            drift = abs(np.linalg.norm(x1[3:7]) - 1.0)
            assert drift < 5.0 * dt**5


class TestShootingGrid:
    def test_variable_count_formula(self):
        # 1 time + N * (state + input + 3 per waypoint) + terminal state + M
        g = ShootingGrid(node_count=10, waypoint_count=1)
        assert g.n_var == 1 + 10 * (13 + 4 + 3) + 13 + 1 == 215

    def test_variable_count_generic(self):
        for N, M in ((2, 1), (5, 3), (40, 7)):
            g = ShootingGrid(node_count=N, waypoint_count=M)
            assert g.n_var == 1 + N * (13 + 4 + 3 * M) + 13 + M

    def test_slices_partition_vector(self):
        g = ShootingGrid(node_count=4, waypoint_count=2)
        seen = np.zeros(g.n_var, dtype=int)
        seen[g.idx_time] += 1
        for k in range(g.node_count):
            for sl in (g.state_slice(k), g.input_slice(k), g.lam_slice(k), g.mu_slice(k), g.nu_slice(k)):
                seen[sl] += 1
        seen[g.state_slice(g.node_count)] += 1
        seen[g.lam_slice(g.node_count)] += 1
        assert np.all(seen == 1)

    def test_invalid_sizes_raise(self):
        with pytest.raises(ValueError):
            ShootingGrid(node_count=1, waypoint_count=1)
        with pytest.raises(ValueError):
            ShootingGrid(node_count=5, waypoint_count=0)

    def test_node_index_bounds(self):
        g = ShootingGrid(node_count=3, waypoint_count=1)
        with pytest.raises(IndexError):
            g.state_slice(4)

    def test_pack_unpack_round_trip(self, rng):
        g = ShootingGrid(node_count=6, waypoint_count=2)
        N, M = 6, 2
        t = 3.7
        states = rng.standard_normal((N + 1, 13))
        inputs = rng.standard_normal((N, 4))
        lam = rng.standard_normal((N + 1, M))
        mu = rng.standard_normal((N, M))
        nu = rng.standard_normal((N, M))
        x = g.pack(t, states, inputs, lam, mu, nu)
        assert x.shape == (g.n_var,)
        t2, s2, i2, l2, m2, n2 = g.unpack(x)
        assert t2 == t
        for a, b in ((states, s2), (inputs, i2), (lam, l2), (mu, m2), (nu, n2)):
            np.testing.assert_array_equal(a, b)
        # and packing the unpacked parts reproduces x bitwise
        np.testing.assert_array_equal(g.pack(t2, s2, i2, l2, m2, n2), x)

    def test_constraint_block_offsets_contiguous(self):
        g = ShootingGrid(node_count=5, waypoint_count=3, end_rows=6)
        off = g.block_offsets
        order = ["initial", "dynamics", "progress", "boundary", "end_state", "input_norm", "sequencing", "cpc"]
        prev_end = 0
        for name in order:
            a, b = off[name]
            assert a == prev_end and b >= a
            prev_end = b
        assert prev_end == g.n_con
        assert off["sequencing"][1] - off["sequencing"][0] == 5 * 2
        assert off["cpc"][1] - off["cpc"][0] == 5 * 3
