"""The imperfect driving policy under repair.

Longitudinal control only: proportional speed tracking toward a cruise
setpoint, with a reaction to leading obstacles that is deliberately flawed.
The policy only reacts to participants inside a narrow frontal arc and
inside a short reaction range, and when it does react it merely matches the
obstacle's scalar speed. Crossing and merging traffic outside the arc is
ignored entirely, which makes intersection and merge templates collision
prone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .actions import snap_to_action
from .geometry import wrap_angle
from .sim import COMMAND_MAX, COMMAND_MIN, SceneObservation


@dataclass
class DrivingPolicy:
    cruise_speed: float = 10.0
    reaction_range: float = 15.0
    gain_p: float = 0.3          # 1/s proportional speed-tracking gain
    blind_arc: float = math.radians(40.0)  # half-angle; obstacles beyond it are ignored

    def __post_init__(self):
        if self.reaction_range <= 0:
            raise ValueError("reaction_range must be positive")
        if not 0.0 < self.blind_arc <= math.pi:
            raise ValueError("blind_arc must be in (0, pi]")

    def decide(self, obs: SceneObservation) -> float:
        ego = obs.ego
        lead = None
        lead_dist = math.inf
        for p in obs.participants:
            dx, dy = p.x - ego.x, p.y - ego.y
            dist = math.hypot(dx, dy)
            if dist > self.reaction_range:
                continue
            bearing = wrap_angle(math.atan2(dy, dx) - ego.heading)
            if abs(bearing) > self.blind_arc:
                continue
            if dist < lead_dist:
                lead, lead_dist = p, dist
        target = lead.speed if lead is not None else self.cruise_speed
        raw = self.gain_p * (target - ego.speed)
        return snap_to_action(min(max(raw, COMMAND_MIN), COMMAND_MAX))
