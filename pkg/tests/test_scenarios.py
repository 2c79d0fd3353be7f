"""Tests for the scenario catalog, serialization, and lap concatenation."""

import json

import numpy as np
import pytest

from cpcopt.scenarios import (
    Scenario,
    concat_laps,
    get_scenario,
    hairpin_random_boxes,
    list_scenarios,
    load_scenario_file,
    run_scenario,
    scenario_from_dict,
)

from conftest import make_track


EXPECTED_NAMES = [
    "p2p_3m",
    "p2p_3m_rt",
    "p2p_6m",
    "p2p_9m",
    "p2p_12m",
    "p2p_15m",
    "straight_regular",
    "straight_irregular",
    "hairpin",
    "hairpin_poor",
    "hairpin_random",
    "vertical_turn_identity",
    "vertical_turn_flip",
    "vertical_turn_race_identity",
    "vertical_turn_race_flip",
    "flip_vs_freefall_identity",
    "flip_vs_freefall_flip",
]


class TestCatalog:
    def test_expected_names_present(self):
        names = list_scenarios()
        for name in EXPECTED_NAMES:
            assert name in names, name

    def test_unknown_name_raises(self):
        with pytest.raises(KeyError):
            get_scenario("nonexistent")

    def test_p2p_definition(self):
        sc = get_scenario("p2p_3m")
        assert sc.node_count == 300
        assert sc.d_tol == pytest.approx(1e-3)
        assert sc.model == "full"
        np.testing.assert_allclose(sc.waypoints, [[3.0, 0.0, 0.0]])
        assert sc.end_conditions.velocity_zero and sc.end_conditions.attitude_identity
        (exp,) = sc.expected
        assert exp.value == pytest.approx(0.918)
        assert exp.rel_tol == pytest.approx(0.02)

    def test_reduced_variant(self):
        sc = get_scenario("p2p_3m_rt")
        assert sc.model == "reduced"
        (exp,) = sc.expected
        assert exp.value == pytest.approx(0.891)

    def test_every_scenario_builds(self):
        for name in list_scenarios():
            sc = get_scenario(name)
            if sc.long_running:
                continue
            problem, track, cfg = sc.build()
            assert problem.n_var > 0
            guess = sc.initial_guess(problem)
            assert guess.x.shape == (problem.n_var,)

    def test_long_running_flagged(self):
        assert get_scenario("airsim_qualifier1").long_running

    def test_catalog_deterministic(self):
        assert list_scenarios() == list_scenarios()


class TestSerialization:
    def test_round_trip_through_dict(self):
        for name in ("p2p_3m", "hairpin_random", "vertical_turn_flip"):
            sc = get_scenario(name)
            again = scenario_from_dict(sc.as_dict())
            assert again.name == sc.name
            assert again.node_count == sc.node_count
            np.testing.assert_allclose(again.waypoints, sc.waypoints)
            assert again.initializer == sc.initializer
            assert again.expected == sc.expected
            assert again.end_conditions == sc.end_conditions

    def test_dict_is_json_safe(self):
        for name in list_scenarios():
            json.dumps(get_scenario(name).as_dict())

    def test_load_from_file(self, tmp_path):
        sc = get_scenario("p2p_6m")
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(sc.as_dict()))
        again = load_scenario_file(path)
        assert again.name == sc.name
        np.testing.assert_allclose(again.waypoints, sc.waypoints)


class TestConcatLaps:
    def test_seven_waypoints_two_and_a_half_laps(self):
        track = make_track(np.arange(21, dtype=float).reshape(7, 3))
        out = concat_laps(track, 2.5)
        assert out.waypoint_count == 7 + 7 + 4  # half lap truncates at ceil(7/2)
        np.testing.assert_allclose(out.waypoints[7:14], track.waypoints)
        np.testing.assert_allclose(out.waypoints[14:], track.waypoints[:4])

    def test_whole_laps(self):
        track = make_track(np.arange(12, dtype=float).reshape(4, 3))
        out = concat_laps(track, 3)
        assert out.waypoint_count == 12
        assert out.tolerance.shape == (12,)

    def test_invalid_lap_counts(self):
        track = make_track(np.arange(12, dtype=float).reshape(4, 3))
        with pytest.raises(ValueError):
            concat_laps(track, 0.5)
        with pytest.raises(ValueError):
            concat_laps(track, 1.25)


class TestRandomBoxes:
    def test_box_layout(self):
        boxes = hairpin_random_boxes()
        # one box per anchor: start, each waypoint, end
        assert boxes.shape[1:] == (3, 2)
        assert np.all(boxes[..., 0] <= boxes[..., 1])


class TestRunScenario:
    def test_pipeline_on_small_custom_scenario(self):
        # a deliberately tiny hover-to-hover hop keeps the full pipeline
        # (init -> solve -> verify -> compare) affordable in CI
        from cpcopt.progress import EndConditions

        sc = Scenario(
            name="mini_hop",
            config_key="standard",
            node_count=30,
            d_tol=0.1,
            waypoints=np.array([[2.0, 0.0, 0.0]]),
            start_position=np.zeros(3),
            end_conditions=EndConditions.hover(),
            expected=(),
        )
        result = run_scenario(sc)
        assert result.report.success
        assert result.verification.ok
        assert result.ok
        d = result.as_dict()
        json.dumps(d)
        assert d["scenario"] == "mini_hop"
