"""Unit tests for the independent verification layer."""

import numpy as np
import pytest

from cpcopt.progress import EndConditions, ProgressVariables
from cpcopt.quad_model import QuadState, dynamics_core, named_config
from cpcopt.solution import Solution
from cpcopt.transcription import rk4_step
from cpcopt.verify import (
    check_input_bounds,
    check_quaternion_drift,
    check_waypoints,
    lap_timings,
    reintegrate,
    verify_solution,
)

from conftest import make_track


def _rollout_solution(cfg, t_total=1.0, N=50, u_fn=None):
    """Exact-RK4 full-model rollout packaged as a Solution."""
    f = lambda s, u: np.array(dynamics_core(s, u, cfg))
    dt = t_total / N
    states = np.zeros((N + 1, 13))
    states[0] = QuadState.hover(np.zeros(3)).as_vector()
    inputs = np.empty((N, 4))
    for k in range(N):
        u = u_fn(k) if u_fn else np.full(4, cfg.hover_thrust * 1.02)
        inputs[k] = u
        states[k + 1] = rk4_step(f, states[k], u, dt)
    lam = np.linspace(1.0, 0.0, N + 1)[:, None]
    mu = np.full((N, 1), 1.0 / N)
    nu = np.zeros((N, 1))
    return Solution(
        total_time=t_total,
        states=states,
        inputs=inputs,
        progress=ProgressVariables(lam=lam, mu=mu, nu=nu),
        metadata={"model": "full"},
    )


class TestReintegrate:
    def test_consistent_rollout_reproduces_nodes(self, standard_cfg):
        sol = _rollout_solution(standard_cfg)
        fine = reintegrate(sol, standard_cfg, refinement=1)
        node_rows = fine.states[:: fine.refinement] if hasattr(fine, "refinement") else fine.states
        # fine grid at refinement 1 coincides with the node grid
        np.testing.assert_allclose(fine.states[-1], sol.states[-1], atol=1e-12)

    def test_refinement_converges(self, standard_cfg):
        # a trajectory generated with coarse RK4 steps: refining the check
        # integration changes the endpoint only at the discretization-error
        # level, and successive refinements agree ever closer
        sol = _rollout_solution(standard_cfg, u_fn=lambda k: np.array([1.0, 3.0, 2.0, 4.0]) * 0.9)
        ends = [reintegrate(sol, standard_cfg, refinement=r).states[-1] for r in (1, 10, 100)]
        err_10 = np.max(np.abs(ends[1] - ends[2]))
        err_1 = np.max(np.abs(ends[0] - ends[2]))
        assert err_10 < err_1 or err_1 < 1e-12

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_detected(self, standard_cfg):
        sol = _rollout_solution(standard_cfg)
        # one-sided thrust at an absurd step size: the bodyrate coupling
        # terms overflow within a few steps
        bad = Solution(
            total_time=1e3,
            states=sol.states,
            inputs=np.tile([1e3, 0.0, 0.0, 0.0], (sol.inputs.shape[0], 1)),
            progress=sol.progress,
            metadata={"model": "full"},
        )
        from cpcopt.verify import DivergenceError

        with pytest.raises(DivergenceError):
            reintegrate(bad, standard_cfg, refinement=1)


class TestWaypointCheck:
    def test_min_distance_and_pass_time(self, standard_cfg):
        sol = _rollout_solution(standard_cfg, t_total=2.0)
        fine = reintegrate(sol, standard_cfg, refinement=10)
        # pick the fine-grid point at mid-flight as the waypoint
        mid = fine.positions[len(fine.times) // 2]
        track = make_track([mid], tolerance=0.3)
        chk = check_waypoints(fine, track)
        assert chk.all_passed
        assert chk.min_distance[0] < 1e-9
        assert 0.0 < chk.pass_time[0] < 2.0

    def test_missed_waypoint_flagged(self, standard_cfg):
        sol = _rollout_solution(standard_cfg, t_total=0.5)
        fine = reintegrate(sol, standard_cfg, refinement=2)
        track = make_track([[100.0, 0.0, 0.0]], tolerance=0.3)
        chk = check_waypoints(fine, track)
        assert not chk.all_passed

    def test_order_violation_flagged(self, standard_cfg):
        # straight climb: putting the later waypoint before the earlier one
        # along the path must be caught
        sol = _rollout_solution(standard_cfg, t_total=2.0)
        fine = reintegrate(sol, standard_cfg, refinement=5)
        p_early = fine.positions[len(fine.times) // 4]
        p_late = fine.positions[3 * len(fine.times) // 4]
        if np.linalg.norm(p_late - p_early) > 1e-6:
            track = make_track([p_late, p_early], tolerance=1e-3)
            chk = check_waypoints(fine, track)
            assert not (chk.all_passed and chk.ordered)


class TestBoundsAndDrift:
    def test_input_bounds_full_model(self, standard_cfg):
        sol = _rollout_solution(standard_cfg)
        rep = check_input_bounds(sol, standard_cfg)
        assert rep["ok"]
        bad = Solution(
            total_time=sol.total_time,
            states=sol.states,
            inputs=np.full_like(sol.inputs, standard_cfg.thrust_max + 0.5),
            progress=sol.progress,
            metadata={"model": "full"},
        )
        assert not check_input_bounds(bad, standard_cfg)["ok"]

    def test_quaternion_drift(self, standard_cfg):
        sol = _rollout_solution(standard_cfg)
        assert check_quaternion_drift(sol)["ok"]
        states = sol.states.copy()
        states[:, 3:7] *= 1.01
        bad = Solution(
            total_time=sol.total_time,
            states=states,
            inputs=sol.inputs,
            progress=sol.progress,
            metadata={"model": "full"},
        )
        assert not check_quaternion_drift(bad)["ok"]

    def test_full_report_round_trips_to_json(self, standard_cfg):
        import json

        sol = _rollout_solution(standard_cfg, t_total=0.5)
        fine = reintegrate(sol, standard_cfg, refinement=3)
        track = make_track([fine.positions[len(fine.times) // 2]], tolerance=0.3)
        report = verify_solution(sol, track, standard_cfg, refinement=3)
        parsed = json.loads(report.to_json())
        assert "waypoints" in parsed and "ok" in parsed


def _circle(times, radius=5.0, period=4.0, center=(0.0, 0.0, 2.0)):
    w = 2 * np.pi / period
    return np.column_stack(
        [
            center[0] + radius * np.cos(w * times),
            center[1] + radius * np.sin(w * times),
            np.full_like(times, center[2]),
        ]
    )


class TestLapTimings:
    def test_perfectly_periodic_laps_have_zero_spread(self):
        times = np.linspace(0.0, 12.0, 2401)  # 3 laps of 4 s
        pos = _circle(times)
        ref = _circle(np.linspace(0.0, 4.0, 400, endpoint=False))
        rep = lap_timings(times, pos, ref, points_per_lap=24)
        assert rep.mean == pytest.approx(4.0, abs=1e-2)
        assert rep.std < 1e-2
        assert rep.segment_times.shape[0] >= 24

    def test_two_speed_laps_show_spread(self):
        # first lap 4 s, second lap 6 s: consecutive-visit differences at
        # each timing point alternate between the two lap times
        t1 = np.linspace(0.0, 4.0, 801, endpoint=False)
        t2 = 4.0 + np.linspace(0.0, 6.0, 1201)
        phase = np.concatenate([t1 / 4.0, (t2 - 4.0) / 6.0])
        times = np.concatenate([t1, t2])
        w = 2 * np.pi
        pos = np.column_stack([5 * np.cos(w * phase), 5 * np.sin(w * phase), np.full_like(phase, 2.0)])
        ref = _circle(np.linspace(0.0, 4.0, 400, endpoint=False))
        rep = lap_timings(times, pos, ref, points_per_lap=16)
        assert 4.5 < rep.mean < 5.5
        assert rep.std > 0.2

    def test_window_excludes_takeoff(self):
        lead = np.linspace(-2.0, 0.0, 100, endpoint=False)
        lap_t = np.linspace(0.0, 8.0, 1601)
        times = np.concatenate([lead, lap_t])
        pos = np.vstack([np.tile([[20.0, 0.0, 0.0]], (100, 1)), _circle(lap_t)])
        ref = _circle(np.linspace(0.0, 4.0, 400, endpoint=False))
        rep = lap_timings(times, pos, ref, points_per_lap=12, window=(0.0, 8.0))
        assert rep.mean == pytest.approx(4.0, abs=5e-2)

    def test_never_revisited_points_excluded_with_warning(self):
        # a half lap: no timing point is visited twice
        times = np.linspace(0.0, 2.0, 401)
        pos = _circle(times)  # half of the 4 s period
        ref = _circle(np.linspace(0.0, 4.0, 400, endpoint=False))
        with pytest.warns(UserWarning), pytest.raises(ValueError):
            lap_timings(times, pos, ref, points_per_lap=8)

    def test_too_short_trajectory_rejected(self):
        with pytest.raises(ValueError):
            lap_timings(np.array([0.0, 1.0]), np.zeros((2, 3)), np.zeros((4, 3)))
