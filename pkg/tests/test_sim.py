import math

import numpy as np
import pytest

from drivefix.config import DEFAULT_SIM
from drivefix.io import (
    load_scenario,
    read_trace,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
    write_trace,
)
from drivefix.policy import DrivingPolicy
from drivefix.sim import (
    InvalidScenario,
    NpcScript,
    RoutePath,
    Scenario,
    VehicleState,
    detect_collision,
    run_episode,
    step_vehicle,
    validate_scenario,
)


def straight_scenario(npcs=None, time_budget=30.0, start_speed=10.0):
    return Scenario(
        template_id="S3_crossing",
        ego_route=[(0.0, -50.0), (0.0, 50.0)],
        ego_start_speed=start_speed,
        destination_radius=3.0,
        npcs=npcs or [],
        time_budget=time_budget,
        seed=1,
    )


class ConstantPolicy:
    def __init__(self, command):
        self.command = command

    def decide(self, obs):
        return self.command


def _state(x=0.0, y=0.0, heading=0.0, speed=0.0):
    return VehicleState(x, y, heading, speed, 4.5, 2.0)


def test_brake_step():
    out = step_vehicle(_state(speed=10.0), -1.0, (100.0, 0.0), 0.1)
    assert out.speed == pytest.approx(9.2)


def test_brake_clamps_at_zero():
    out = step_vehicle(_state(speed=0.0), -1.0, (100.0, 0.0), 0.1)
    assert out.speed == 0.0


def test_coasting_advances_position():
    out = step_vehicle(_state(speed=10.0), 0.0, (100.0, 0.0), 0.1)
    assert out.speed == pytest.approx(10.0)
    assert out.x == pytest.approx(1.0)
    assert out.y == pytest.approx(0.0)


def test_speed_capped_at_vmax():
    st = _state(speed=19.9)
    for _ in range(20):
        st = step_vehicle(st, 0.8, (1000.0, 0.0), 0.1)
    assert st.speed == DEFAULT_SIM.v_max


def test_turn_rate_clamped():
    st = _state(speed=10.0, heading=0.0)
    out = step_vehicle(st, 0.0, (0.0, 50.0), 0.1)  # target 90 deg off
    assert abs(out.heading) <= DEFAULT_SIM.omega_max * 0.1 + 1e-12


def test_full_brake_stops_within_bound():
    for v0 in (3.0, 7.5, 12.0, 20.0):
        st = _state(speed=v0)
        bound = math.ceil(v0 / (DEFAULT_SIM.a_brake * DEFAULT_SIM.dt))
        steps = 0
        while st.speed > 0.0:
            st = step_vehicle(st, -1.0, (1000.0, 0.0), DEFAULT_SIM.dt)
            steps += 1
            assert steps <= bound
        assert steps <= bound


def test_detect_collision_symmetry():
    rng = np.random.default_rng(0)
    for _ in range(200):
        a = _state(*rng.uniform(-5, 5, size=2), rng.uniform(-3, 3), 0.0)
        b = _state(*rng.uniform(-5, 5, size=2), rng.uniform(-3, 3), 0.0)
        assert detect_collision(a, b) == detect_collision(b, a)


def test_route_projection_and_lookahead():
    path = RoutePath([(0.0, 0.0), (10.0, 0.0), (10.0, 10.0)])
    assert path.length == pytest.approx(20.0)
    assert path.project(5.0, 1.0) == pytest.approx(5.0)
    assert path.point_at(15.0) == (pytest.approx(10.0), pytest.approx(5.0))
    assert path.heading_at(15.0) == pytest.approx(math.pi / 2)


def test_empty_road_episode_succeeds():
    trace, outcome = run_episode(straight_scenario(), ConstantPolicy(0.0))
    assert outcome.result == "Success"
    assert outcome.y_s == 0
    assert all(s.npcs == [] for s in trace.steps)


def test_stopped_npc_forced_crash():
    npc = NpcScript(route=[(0.0, 0.0), (0.0, 5.0)], spawn_time=0.0, target_speed=0.0)
    scenario = straight_scenario(npcs=[npc])
    trace, outcome = run_episode(scenario, ConstantPolicy(0.8))
    assert outcome.result == "Collision"
    assert outcome.y_s == 1


def test_braking_repair_prevents_crash():
    # Full throttle into a parked NPC collides at ~3.3 s (previous test).
    # Braking from 1.0 s, more than 2 s before the impact, must avoid it:
    # braking distance v^2 / (2 * a_brake) < gap at intervention time.
    npc = NpcScript(route=[(0.0, 0.0), (0.0, 5.0)], spawn_time=0.0, target_speed=0.0)
    scenario = straight_scenario(npcs=[npc], time_budget=20.0)
    intervene_from = 10  # steps

    class BrakeEarly:
        y_safe_hat = 0.9
        repair_index = 9
        a_final = 0.0

        def __call__(self, obs, a_ads):
            self.a_final = -1.0 if obs.t >= intervene_from else a_ads
            return self

    trace, outcome = run_episode(scenario, ConstantPolicy(0.8), repair=BrakeEarly())
    assert outcome.result != "Collision"
    ego = trace.steps[intervene_from].ego
    gap = math.hypot(ego.x - 0.0, ego.y - 0.0)
    assert ego.speed ** 2 / (2 * DEFAULT_SIM.a_brake) < gap


def test_outcome_exclusive_and_timeout():
    scenario = straight_scenario(time_budget=1.0)
    trace, outcome = run_episode(scenario, ConstantPolicy(0.0))
    assert outcome.result == "Timeout"
    assert outcome.y_s == 0
    assert outcome.final_step == 10


def test_determinism_byte_identical_traces(tmp_path):
    npc = NpcScript(route=[(-40.0, 0.0), (40.0, 0.0)], spawn_time=1.0, target_speed=8.0)
    scenario = straight_scenario(npcs=[npc])
    policy = DrivingPolicy()
    p1, p2 = tmp_path / "a.log", tmp_path / "b.log"
    for path in (p1, p2):
        trace, _ = run_episode(scenario, policy)
        write_trace(path, trace)
    assert p1.read_bytes() == p2.read_bytes()


def test_invalid_scenarios_rejected():
    bad = straight_scenario()
    bad.ego_route = [(0.0, 0.0)]
    with pytest.raises(InvalidScenario):
        validate_scenario(bad)
    bad = straight_scenario()
    bad.time_budget = 0.0
    with pytest.raises(InvalidScenario):
        run_episode(bad, ConstantPolicy(0.0))
    bad = straight_scenario(npcs=[NpcScript(route=[(0, 0), (1, 0)], spawn_time=-1.0, target_speed=5.0)])
    with pytest.raises(InvalidScenario):
        validate_scenario(bad)
    bad = straight_scenario(npcs=[NpcScript(route=[(0, 0), (1, 0)], spawn_time=0.0,
                                            target_speed=5.0, speed_profile=[(2.0, 5.0), (1.0, 3.0)])])
    with pytest.raises(InvalidScenario):
        validate_scenario(bad)


def test_npc_speed_profile_interpolation():
    npc = NpcScript(route=[(-40.0, 0.0), (40.0, 0.0)], spawn_time=0.0, target_speed=99.0,
                    speed_profile=[(0.0, 10.0), (2.0, 0.0)])
    scenario = straight_scenario(npcs=[npc], time_budget=5.0, start_speed=0.0)
    trace, _ = run_episode(scenario, ConstantPolicy(-1.0))
    # at t=1 s the profile gives 5 m/s
    assert trace.steps[10].npcs[0].speed == pytest.approx(5.0)
    # after 2 s the NPC holds the last breakpoint (stopped)
    assert trace.steps[30].npcs[0].speed == 0.0


def test_scenario_file_round_trip(tmp_path):
    npc = NpcScript(route=[(-40.0, 0.0), (40.0, 0.0)], spawn_time=1.5, target_speed=8.0,
                    speed_profile=[(0.0, 8.0), (3.0, 2.0)], dimensions=(5.0, 2.2))
    scenario = straight_scenario(npcs=[npc])
    path = tmp_path / "s.scn"
    save_scenario(path, scenario)
    loaded = load_scenario(path)
    assert scenario_to_dict(loaded) == scenario_to_dict(scenario)
    assert scenario_from_dict(scenario_to_dict(scenario)) == scenario


def test_trace_round_trip(tmp_path):
    npc = NpcScript(route=[(-40.0, 0.0), (40.0, 0.0)], spawn_time=1.0, target_speed=8.0)
    scenario = straight_scenario(npcs=[npc])
    trace, outcome = run_episode(scenario, DrivingPolicy())
    path = tmp_path / "t.log"
    write_trace(path, trace)
    back = read_trace(path)
    assert back.outcome == outcome
    assert len(back.steps) == len(trace.steps)
    assert back.steps[3].ego.x == trace.steps[3].ego.x
    assert back.steps[-1].a_ads == trace.steps[-1].a_ads
