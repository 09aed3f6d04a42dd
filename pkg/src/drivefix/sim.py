"""Deterministic fixed-timestep 2D kinematic simulator.

World model: an ego vehicle following a planned route under a throttle-brake
command, plus scripted NPC vehicles that replay their routes kinematically
(no collision avoidance). Lateral ego control is pure pursuit on the route
and is never touched by repair plug-ins; repairs act on the longitudinal
command only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_SIM, SimConfig
from .geometry import box_corners, boxes_overlap, wrap_angle

COMMAND_MIN = -1.0
COMMAND_MAX = 0.8


class InvalidScenario(Exception):
    pass


@dataclass
class VehicleState:
    x: float
    y: float
    heading: float        # radians, normalized to (-pi, pi]
    speed: float          # m/s, >= 0
    length: float
    width: float

    def corners(self) -> np.ndarray:
        return box_corners(self.x, self.y, self.heading, self.length, self.width)


@dataclass
class NpcScript:
    route: list[tuple[float, float]]
    spawn_time: float
    target_speed: float
    speed_profile: list[tuple[float, float]] | None = None  # (sec since spawn, m/s)
    dimensions: tuple[float, float] = (4.5, 2.0)             # (length, width)


@dataclass
class Scenario:
    template_id: str
    ego_route: list[tuple[float, float]]
    ego_start_speed: float
    destination_radius: float
    npcs: list[NpcScript]
    time_budget: float
    seed: int


@dataclass
class SceneObservation:
    t: int
    ego: VehicleState
    participants: list[VehicleState]
    route_lookahead: list[tuple[float, float, float]]  # (x, y, heading)


@dataclass
class EpisodeOutcome:
    result: str            # Success | Collision | Timeout
    y_s: int               # 1 iff Collision
    final_step: int


@dataclass
class TraceStep:
    t: int
    ego: VehicleState
    npcs: list[VehicleState | None]  # one slot per scenario NPC, None before spawn
    a_ads: float
    y_safe_hat: float | None
    repair_index: int | None
    a_final: float
    reward: float


@dataclass
class EpisodeTrace:
    steps: list[TraceStep] = field(default_factory=list)
    outcome: EpisodeOutcome | None = None


def validate_scenario(scenario: Scenario) -> None:
    def check_polyline(points, who):
        if len(points) < 2:
            raise InvalidScenario(f"{who} route needs at least 2 points")
        for a, b in zip(points, points[1:]):
            if math.hypot(b[0] - a[0], b[1] - a[1]) == 0.0:
                raise InvalidScenario(f"{who} route has repeated consecutive points")

    check_polyline(scenario.ego_route, "ego")
    if scenario.time_budget <= 0:
        raise InvalidScenario("time_budget must be positive")
    if scenario.destination_radius <= 0:
        raise InvalidScenario("destination_radius must be positive")
    if scenario.ego_start_speed < 0:
        raise InvalidScenario("ego_start_speed must be >= 0")
    for i, npc in enumerate(scenario.npcs):
        check_polyline(npc.route, f"npc[{i}]")
        if npc.spawn_time < 0:
            raise InvalidScenario(f"npc[{i}] spawn_time must be >= 0")
        if npc.target_speed < 0:
            raise InvalidScenario(f"npc[{i}] target_speed must be >= 0")
        if npc.speed_profile:
            times = [t for t, _ in npc.speed_profile]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise InvalidScenario(f"npc[{i}] speed_profile times must increase")
            if any(v < 0 for _, v in npc.speed_profile):
                raise InvalidScenario(f"npc[{i}] speed_profile speeds must be >= 0")
        if npc.dimensions[0] <= 0 or npc.dimensions[1] <= 0:
            raise InvalidScenario(f"npc[{i}] dimensions must be positive")


class RoutePath:
    """Arc-length parameterized polyline."""

    def __init__(self, points: list[tuple[float, float]]):
        pts = np.asarray(points, dtype=np.float64)
        seg = np.diff(pts, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        self.points = pts
        self.seg = seg
        self.seg_len = seg_len
        self.cum = np.concatenate([[0.0], np.cumsum(seg_len)])
        self.headings = np.arctan2(seg[:, 1], seg[:, 0])
        self.length = float(self.cum[-1])

    def _locate(self, s: float) -> tuple[int, float]:
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self.cum, s, side="right")) - 1
        i = min(max(i, 0), len(self.seg) - 1)
        frac = (s - self.cum[i]) / self.seg_len[i]
        return i, frac

    def point_at(self, s: float) -> tuple[float, float]:
        i, frac = self._locate(s)
        p = self.points[i] + frac * self.seg[i]
        return float(p[0]), float(p[1])

    def heading_at(self, s: float) -> float:
        i, _ = self._locate(s)
        return float(self.headings[i])

    def project(self, x: float, y: float) -> float:
        """Arc length of the closest route point to (x, y)."""
        p = np.array([x, y])
        rel = p - self.points[:-1]
        t = np.clip((rel * self.seg).sum(axis=1) / (self.seg_len ** 2), 0.0, 1.0)
        closest = self.points[:-1] + t[:, None] * self.seg
        d2 = ((closest - p) ** 2).sum(axis=1)
        i = int(np.argmin(d2))
        return float(self.cum[i] + t[i] * self.seg_len[i])

    def end(self) -> tuple[float, float]:
        return float(self.points[-1][0]), float(self.points[-1][1])


def detect_collision(a: VehicleState, b: VehicleState) -> bool:
    """Oriented-rectangle overlap via the separating-axis test."""
    if a.length <= 0 or a.width <= 0 or b.length <= 0 or b.width <= 0:
        raise ValueError("vehicles need positive dimensions")
    return boxes_overlap(a.corners(), b.corners())


def step_vehicle(state: VehicleState, command: float, steer_target: tuple[float, float],
                 dt: float, cfg: SimConfig = DEFAULT_SIM) -> VehicleState:
    """One forward-Euler step: throttle/brake longitudinally, pure pursuit laterally."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    command = min(max(command, COMMAND_MIN), COMMAND_MAX)
    accel = command * (cfg.a_throttle if command >= 0 else cfg.a_brake)
    new_speed = min(max(state.speed + accel * dt, 0.0), cfg.v_max)

    dx = steer_target[0] - state.x
    dy = steer_target[1] - state.y
    dist = math.hypot(dx, dy)
    if dist > 1e-9 and state.speed > 0.0:
        alpha = wrap_angle(math.atan2(dy, dx) - state.heading)
        curvature = 2.0 * math.sin(alpha) / dist
        omega = min(max(state.speed * curvature, -cfg.omega_max), cfg.omega_max)
    else:
        omega = 0.0

    new_x = state.x + state.speed * math.cos(state.heading) * dt
    new_y = state.y + state.speed * math.sin(state.heading) * dt
    new_heading = wrap_angle(state.heading + omega * dt)
    return VehicleState(new_x, new_y, new_heading, new_speed, state.length, state.width)


class _NpcRunner:
    def __init__(self, script: NpcScript):
        self.script = script
        self.path = RoutePath(script.route)
        self.s = 0.0

    def active(self, time: float) -> bool:
        return time >= self.script.spawn_time

    def speed(self, time: float) -> float:
        rel = time - self.script.spawn_time
        profile = self.script.speed_profile
        if profile:
            times = [t for t, _ in profile]
            speeds = [v for _, v in profile]
            return float(np.interp(rel, times, speeds))
        return self.script.target_speed

    def state(self, time: float) -> VehicleState:
        x, y = self.path.point_at(self.s)
        heading = self.path.heading_at(self.s)
        length, width = self.script.dimensions
        return VehicleState(x, y, heading, self.speed(time), length, width)

    def advance(self, time: float, dt: float) -> None:
        self.s = min(self.s + self.speed(time) * dt, self.path.length)


def run_episode(scenario: Scenario, policy, repair=None, dt: float | None = None,
                cfg: SimConfig = DEFAULT_SIM, reward_fn=None) -> tuple[EpisodeTrace, EpisodeOutcome]:
    """Run one scenario to termination.

    `policy` must expose decide(obs) -> command. `repair`, when given, is
    called as repair(obs, a_ads) and must return an object with a_final,
    y_safe_hat and repair_index attributes; its merged command drives the
    ego. `reward_fn(a_ads, decision, violation) -> float` fills the trace
    reward column (0.0 when omitted).
    """
    validate_scenario(scenario)
    if dt is None:
        dt = cfg.dt
    route = RoutePath(scenario.ego_route)
    x0, y0 = scenario.ego_route[0]
    ego = VehicleState(x0, y0, route.heading_at(0.0), scenario.ego_start_speed,
                       cfg.ego_length, cfg.ego_width)
    npcs = [_NpcRunner(n) for n in scenario.npcs]
    dest = route.end()
    s_ego = 0.0
    trace = EpisodeTrace()
    t = 0
    max_steps = int(math.ceil(scenario.time_budget / dt))

    while True:
        time = t * dt
        active = [r.active(time) for r in npcs]
        npc_states = [r.state(time) if a else None for r, a in zip(npcs, active)]
        participants = [
            st for st in npc_states
            if st is not None and math.hypot(st.x - ego.x, st.y - ego.y) <= cfg.perception_radius
        ]
        lookahead = []
        for i in range(1, cfg.lookahead_points + 1):
            s_i = s_ego + i * cfg.lookahead_spacing
            px, py = route.point_at(s_i)
            lookahead.append((px, py, route.heading_at(s_i)))
        obs = SceneObservation(t=t, ego=ego, participants=participants,
                               route_lookahead=lookahead)

        a_ads = float(policy.decide(obs))
        if repair is not None:
            decision = repair(obs, a_ads)
            a_cmd = float(decision.a_final)
            y_hat = decision.y_safe_hat
            idx = decision.repair_index
        else:
            decision = None
            a_cmd = a_ads
            y_hat = None
            idx = None
        a_cmd = min(max(a_cmd, COMMAND_MIN), COMMAND_MAX)

        steer_target = route.point_at(min(s_ego + cfg.pursuit_lookahead, route.length))
        new_ego = step_vehicle(ego, a_cmd, steer_target, dt, cfg)
        for runner, was_active in zip(npcs, active):
            if was_active:
                runner.advance(time, dt)

        next_time = (t + 1) * dt
        collision = False
        for runner in npcs:
            if runner.active(next_time) and detect_collision(new_ego, runner.state(next_time)):
                collision = True
                break

        reward = float(reward_fn(a_ads, decision, collision)) if reward_fn else 0.0
        trace.steps.append(TraceStep(t=t, ego=ego, npcs=npc_states, a_ads=a_ads,
                                     y_safe_hat=y_hat, repair_index=idx,
                                     a_final=a_cmd, reward=reward))

        ego = new_ego
        s_ego = max(s_ego, route.project(ego.x, ego.y))
        t += 1

        if collision:
            outcome = EpisodeOutcome("Collision", 1, t)
            break
        if math.hypot(ego.x - dest[0], ego.y - dest[1]) <= scenario.destination_radius:
            outcome = EpisodeOutcome("Success", 0, t)
            break
        if t >= max_steps:
            outcome = EpisodeOutcome("Timeout", 0, t)
            break

    trace.outcome = outcome
    return trace, outcome
