import dataclasses

import pytest

from prevent import config
from prevent.decision import Action
from prevent.world import (
    HazardEntity,
    ScenarioLoadError,
    StateViolationError,
    UnreachableNodeError,
    WorldState,
    load_shipped_scenario,
    parse_scenario,
    shipped_scenario_ids,
)


def glove(x, y=0.0, appears_at=0.0):
    return HazardEntity(
        kind="contaminated_glove", x=x, y=y, label="contaminated_glove",
        on_path=True, unsafe_ground_truth=True, appears_at=appears_at,
    )


class TestClockAndMotion:
    def test_idle_robot_step(self):
        world = WorldState()
        world.step(1.0)
        assert world.clock == 1.0
        assert world.robot.position == (0.0, 0.0)

    def test_navigation_kinematics(self):
        world = WorldState()
        world.begin_navigation("mid")
        world.step(2.0)
        assert world.robot.x == pytest.approx(1.0)

    def test_step_requires_positive_dt(self):
        with pytest.raises(Exception):
            WorldState().step(0.0)

    def test_full_leg_duration(self):
        world = WorldState()
        world.begin_navigation("capping")
        steps = 0
        while not world.at_destination("capping"):
            world.step(config.TICK_DT)
            steps += 1
            assert steps < 2000
        assert world.clock == pytest.approx(119.1, abs=0.2)

    def test_injection_timing(self):
        world = WorldState()
        world.add_hazard(glove(5.0, appears_at=10.0))
        world.step(9.5)
        assert world.active_hazards() == []
        world.step(1.0)
        assert len(world.active_hazards()) == 1

    def test_begin_navigation_to_current_node(self):
        world = WorldState()
        world.begin_navigation("dock")
        assert world.robot.motion_state == "idle"
        assert world.at_destination("dock")

    def test_unreachable_node(self):
        world = WorldState()
        with pytest.raises(UnreachableNodeError):
            world.begin_navigation("annex")
        with pytest.raises(UnreachableNodeError):
            world.begin_navigation("nowhere")


class TestHaltResume:
    def test_halt_preserves_progress(self):
        world = WorldState()
        world.begin_navigation("capping")
        world.step(10.0)
        travelled = world.robot.distance_travelled
        world.halt_robot()
        world.step(5.0)
        assert world.robot.distance_travelled == travelled
        world.resume_robot()
        world.step(10.0)
        assert world.robot.distance_travelled == pytest.approx(travelled + 5.0)

    def test_halt_while_idle_raises(self):
        world = WorldState()
        with pytest.raises(StateViolationError):
            world.halt_robot()

    def test_resume_while_navigating_raises(self):
        world = WorldState()
        world.begin_navigation("capping")
        with pytest.raises(StateViolationError):
            world.resume_robot()


class TestGroundTruthQueries:
    def test_lateral_hazard_excluded_from_ahead(self):
        world = WorldState()
        world.add_hazard(HazardEntity(kind="spillage", x=0.5, y=2.0, label="s",
                                      chemical="ethanol"))
        assert world.ground_truth_query("ahead_0.7m") == []

    def test_sudden_hazard_included_after_materializing(self):
        world = WorldState()
        hazard = world.add_hazard(glove(0.5, appears_at=4.0))
        assert world.ground_truth_query("ahead_0.7m") == []
        world.step(4.5)
        assert world.ground_truth_query("ahead_0.7m") == [hazard]

    def test_empty_world_queries(self):
        world = WorldState()
        assert world.ground_truth_query("ahead_0.7m") == []
        assert world.ground_truth_query("interaction_zone") == []
        assert world.ground_truth_query("radius", radius=5.0) == []

    def test_interaction_zone_within_radius_of_station(self):
        for sid in ("S5", "S6", "T2_OH", "T2_LSH", "T3_OH", "T3_LSH"):
            spec = load_shipped_scenario(sid)
            world = spec.build_world()
            world.dwell(1.0)
            station = world.station_for(spec.task.location)
            zone = world.hazards_in_interaction_zone()
            nearby = world.hazards_in_radius(station.grasp_frame, 1.0, include_hidden=True)
            assert set(h.hazard_id for h in zone) <= set(h.hazard_id for h in nearby)

    def test_unknown_region(self):
        with pytest.raises(Exception):
            WorldState().ground_truth_query("behind")


class TestArm:
    def station_world(self):
        world = WorldState()
        world.robot.x, world.robot.y = world.stations["capping"].position
        return world, world.stations["capping"]

    def test_clean_manipulation_succeeds(self):
        world, station = self.station_world()
        world.arm_move_to_check_pose(station)
        assert world.execute_manipulation(station, "pickup_rack")
        assert world.manipulation_log == ["pickup_rack"]
        assert world.robot.arm_state == "stowed"

    def test_unsafe_zone_hazard_fails_manipulation(self):
        world, station = self.station_world()
        world.add_hazard(HazardEntity(
            kind="knocked_vial", x=station.grasp_frame[0], y=station.grasp_frame[1],
            label="capping_failure", chemical="acetone", containment="spilled",
            in_interaction_zone=True, unsafe_ground_truth=True,
        ))
        assert not world.execute_manipulation(station, "pickup_rack")
        assert world.workflow_failure == "unsafe_manipulation"

    def test_arm_command_while_navigating_raises(self):
        world = WorldState()
        world.begin_navigation("capping")
        with pytest.raises(StateViolationError):
            world.arm_move_to_check_pose(world.stations["capping"])

    def test_arm_command_away_from_station_raises(self):
        world = WorldState()
        with pytest.raises(StateViolationError):
            world.arm_move_to_check_pose(world.stations["capping"])


class TestScenarios:
    def test_all_shipped_scenarios_load(self):
        ids = shipped_scenario_ids()
        assert {"S1", "S2", "S3", "S4", "S5", "S6"} <= set(ids)
        assert {"T1_NH", "T2_OH", "T3_LSH"} <= set(ids)
        for sid in ids:
            spec = load_shipped_scenario(sid)
            world = spec.build_world()
            assert world.clock == 0.0

    def test_seed_determinism(self):
        spec = load_shipped_scenario("S3")
        agendas = []
        for _ in range(2):
            world = spec.build_world()
            world.begin_navigation("capping")
            track = []
            for _ in range(800):
                world.step(config.TICK_DT)
                track.append((round(world.robot.x, 6), len(world.active_hazards())))
            agendas.append(track)
        assert agendas[0] == agendas[1]

    def test_hazards_do_not_teleport(self):
        spec = load_shipped_scenario("S2")
        world = spec.build_world()
        hazard = world.hazards[0]
        origin = hazard.position
        for _ in range(100):
            world.step(0.5)
            assert hazard.position == origin

    def test_missing_header_rejected(self):
        with pytest.raises(ScenarioLoadError):
            parse_scenario("id X\nskill cin\n")

    def test_inconsistent_expected_action_rejected(self):
        text = (
            "scenario 1\nid BAD\nskill cin\ntask nav capping\nseed 1\n"
            "expected_action proceed\nnominal_label spillage\n"
            "hazard kind=spillage chemical=ethanol containment=spilled "
            "x=1 y=0 unsafe=true label=spillage\n"
        )
        with pytest.raises(ScenarioLoadError):
            parse_scenario(text)

    def test_unknown_chemical_rejected(self):
        text = (
            "scenario 1\nid BAD\nskill cin\ntask nav capping\nseed 1\n"
            "expected_action proceed\nnominal_label no_problem_detected\n"
            "hazard kind=spillage chemical=toluene x=1 y=0 label=spillage\n"
        )
        with pytest.raises(ScenarioLoadError):
            parse_scenario(text)

    def test_expected_actions_consistent_with_flags(self):
        for sid in shipped_scenario_ids():
            spec = load_shipped_scenario(sid)
            any_unsafe = any(h.unsafe_ground_truth for h in spec.hazards)
            if any_unsafe:
                assert spec.expected_action is Action.HALT_AWAIT_CONSENT
            else:
                assert spec.expected_action is not Action.HALT_AWAIT_CONSENT

    def test_build_world_does_not_share_hazards(self):
        spec = load_shipped_scenario("S2")
        w1, w2 = spec.build_world(), spec.build_world()
        w1.hazards[0].cleared = True
        assert not w2.hazards[0].cleared
        assert not dataclasses.asdict(spec.hazards[0])["cleared"]


class TestStationViews:
    def test_capping_rack_has_eight_slots(self):
        world = load_shipped_scenario("T2_NH").build_world()
        station = world.station_for("capping")
        rack = world.rack_view(station)
        assert len(rack) == 8
        assert rack == ["capped_vial"] * 8

    def test_uncapped_vial_shows_in_farthest_slot(self):
        world = load_shipped_scenario("S6").build_world()
        world.dwell(1.0)
        station = world.station_for("capping")
        rack = world.rack_view(station)
        assert rack[-1] == "uncapped_vial"
        assert rack[:-1] == ["capped_vial"] * 7

    def test_tray_states(self):
        clean = load_shipped_scenario("T3_NH").build_world()
        glass = load_shipped_scenario("T3_OH").build_world()
        spill = load_shipped_scenario("T3_LSH").build_world()
        for world in (clean, glass, spill):
            world.dwell(1.0)
        station_id = "chemspeed"
        assert clean.tray_view(clean.station_for(station_id)) == "clean"
        assert glass.tray_view(glass.station_for(station_id)) == "broken_glass"
        assert spill.tray_view(spill.station_for(station_id)) == "spillage"
