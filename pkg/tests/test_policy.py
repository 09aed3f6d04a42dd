import math

import pytest

from drivefix.actions import ACTION_VALUES
from drivefix.policy import DrivingPolicy
from drivefix.sim import SceneObservation, VehicleState


def _obs(ego_speed, participants=()):
    ego = VehicleState(0.0, 0.0, 0.0, ego_speed, 4.5, 2.0)
    return SceneObservation(t=0, ego=ego, participants=list(participants),
                            route_lookahead=[(2.0 * i, 0.0, 0.0) for i in range(1, 11)])


def _npc(x, y, speed=8.0):
    return VehicleState(x, y, 0.0, speed, 4.5, 2.0)


def test_at_cruise_speed_outputs_zero():
    policy = DrivingPolicy(cruise_speed=10.0)
    assert policy.decide(_obs(10.0)) == 0.0


def test_standstill_saturates_throttle():
    policy = DrivingPolicy(cruise_speed=10.0, gain_p=0.3)
    assert policy.decide(_obs(0.0)) == 0.8


def test_output_always_in_action_space():
    policy = DrivingPolicy()
    for speed in (0.0, 3.3, 7.9, 10.0, 14.2, 20.0):
        assert policy.decide(_obs(speed)) in ACTION_VALUES


def test_blind_arc_ignores_lateral_traffic():
    policy = DrivingPolicy(blind_arc=math.radians(60.0))
    # bearing 80 degrees, within range: ignored, same output as empty road
    lateral = _npc(10.0 * math.cos(math.radians(80)), 10.0 * math.sin(math.radians(80)), speed=0.0)
    assert policy.decide(_obs(10.0, [lateral])) == policy.decide(_obs(10.0))


def test_lead_vehicle_triggers_slowdown():
    policy = DrivingPolicy()
    stopped_lead = _npc(10.0, 0.0, speed=0.0)
    assert policy.decide(_obs(10.0, [stopped_lead])) < policy.decide(_obs(10.0))


def test_out_of_range_lead_ignored():
    policy = DrivingPolicy(reaction_range=15.0)
    far_lead = _npc(30.0, 0.0, speed=0.0)
    assert policy.decide(_obs(10.0, [far_lead])) == policy.decide(_obs(10.0))


def test_monotone_in_relative_speed():
    policy = DrivingPolicy()
    prev = None
    for ego_speed in (4.0, 6.0, 8.0, 10.0, 12.0, 14.0):
        out = policy.decide(_obs(ego_speed, [_npc(10.0, 0.0, speed=5.0)]))
        if prev is not None:
            assert out <= prev
        prev = out


def test_invalid_parameters_rejected():
    with pytest.raises(ValueError):
        DrivingPolicy(reaction_range=0.0)
    with pytest.raises(ValueError):
        DrivingPolicy(blind_arc=0.0)
