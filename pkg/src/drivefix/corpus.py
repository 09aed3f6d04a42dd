"""Scenario templates, random fuzzing, and corpus construction.

Five desk-scale conflict geometries, one per template id:

  S1_left_turn     ego turns left across an oncoming stream
  S2_right_turn    ego turns right into a road with traffic arriving from the left
  S3_crossing      ego drives straight through a crossing stream
  S4_highway_exit  ego cuts across a faster through-lane to reach an exit
  S5_onramp_merge  ego merges from a ramp into mainline traffic

Per-template fuzz ranges live in data/scenario_ranges.json so corpus builds
are reproducible; fuzzing samples NPC phase/speed/offsets and the ego start
state uniformly from those ranges.
"""

from __future__ import annotations

import importlib.resources
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import DEFAULT_SIM, SimConfig
from .io import load_scenario, read_corpus_index, save_scenario, write_corpus_index
from .policy import DrivingPolicy
from .rng import derive_rng
from .sim import NpcScript, Scenario, run_episode, validate_scenario

TEMPLATES = ("S1_left_turn", "S2_right_turn", "S3_crossing",
             "S4_highway_exit", "S5_onramp_merge")


class UnknownTemplate(Exception):
    pass


class FuzzBudgetExhausted(Exception):
    pass


def load_ranges(path: str | Path | None = None) -> dict:
    if path is not None:
        return json.loads(Path(path).read_text())
    res = importlib.resources.files("drivefix").joinpath("data/scenario_ranges.json")
    return json.loads(res.read_text())


# ---------------------------------------------------------------------------
# route construction


def _resample(points: list[tuple[float, float]], spacing: float = 2.0) -> list[tuple[float, float]]:
    pts = np.asarray(points, dtype=np.float64)
    seg = np.diff(pts, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = cum[-1]
    n = max(int(total // spacing), 1)
    samples = np.linspace(0.0, total, n + 1)
    xs = np.interp(samples, cum, pts[:, 0])
    ys = np.interp(samples, cum, pts[:, 1])
    return [(float(x), float(y)) for x, y in zip(xs, ys)]


def _arc(center, radius, theta0, theta1, n=24):
    thetas = np.linspace(theta0, theta1, n)
    return [(center[0] + radius * math.cos(a), center[1] + radius * math.sin(a))
            for a in thetas]


def _shift(points, dx, dy):
    return [(x + dx, y + dy) for x, y in points]


def _u(rng, lohi):
    return float(rng.uniform(lohi[0], lohi[1]))


def _straight_route(a, b):
    return _resample([a, b])


def _ego_route(template_id: str) -> list[tuple[float, float]]:
    if template_id == "S1_left_turn":
        leg = [(0.0, -45.0), (0.0, -20.0)]
        arc = _arc((-20.0, -20.0), 20.0, 0.0, math.pi / 2)
        out = [(-20.0, 0.0), (-60.0, 0.0)]
        return _resample(leg + arc[1:] + out[1:])
    if template_id == "S2_right_turn":
        leg = [(0.0, -45.0), (0.0, -20.0)]
        arc = _arc((20.0, -20.0), 20.0, math.pi, math.pi / 2)
        out = [(20.0, 0.0), (60.0, 0.0)]
        return _resample(leg + arc[1:] + out[1:])
    if template_id == "S3_crossing":
        return _resample([(0.0, -50.0), (0.0, 50.0)])
    if template_id == "S4_highway_exit":
        leg = [(-70.0, 0.0), (-10.0, 0.0)]
        arc = _arc((-10.0, -30.0), 30.0, math.pi / 2, math.radians(40.0))
        end = arc[-1]
        heading = (math.sin(math.radians(40.0)), -math.cos(math.radians(40.0)))
        out = [(end[0] + 30.0 * heading[0], end[1] + 30.0 * heading[1])]
        return _resample(leg + arc[1:] + out)
    if template_id == "S5_onramp_merge":
        ramp = [(-55.0, -12.0), (-35.0, -8.0), (-20.0, -4.0), (-10.0, -1.2),
                (0.0, 0.0), (50.0, 0.0)]
        return _resample(ramp)
    raise UnknownTemplate(template_id)


def _npc_scripts(template_id: str, rng: np.random.Generator, ranges: dict) -> list[NpcScript]:
    r = ranges[template_id]
    speed = _u(rng, r["npc_speed"])
    spawn = _u(rng, r["npc_spawn"])
    lateral = _u(rng, r["npc_lateral"])
    setback = _u(rng, r["npc_setback"])

    if template_id == "S1_left_turn":
        # oncoming stream, southbound in the adjacent lane
        route = _straight_route((-3.5 + lateral, 30.0 + setback), (-3.5 + lateral, -55.0))
        return [NpcScript(route=route, spawn_time=spawn, target_speed=speed)]
    if template_id == "S2_right_turn":
        # traffic already on the target road, arriving from the left
        route = _straight_route((-50.0 - setback, lateral), (70.0, lateral))
        return [NpcScript(route=route, spawn_time=spawn, target_speed=speed)]
    if template_id == "S3_crossing":
        route = _straight_route((-45.0 - setback, lateral), (55.0, lateral))
        scripts = [NpcScript(route=route, spawn_time=spawn, target_speed=speed)]
        speed2 = _u(rng, r["npc_speed"])
        spawn2 = _u(rng, r["npc2_spawn"])
        route2 = _straight_route((48.0, 7.0 + lateral), (-52.0, 7.0 + lateral))
        scripts.append(NpcScript(route=route2, spawn_time=spawn2, target_speed=speed2))
        return scripts
    if template_id == "S4_highway_exit":
        # fast through-lane traffic approaching from behind on the right
        route = _straight_route((-105.0 - setback, -3.5 + lateral), (60.0, -3.5 + lateral))
        return [NpcScript(route=route, spawn_time=spawn, target_speed=speed)]
    if template_id == "S5_onramp_merge":
        route = _straight_route((-80.0 - setback, lateral), (70.0, lateral))
        return [NpcScript(route=route, spawn_time=spawn, target_speed=speed)]
    raise UnknownTemplate(template_id)


def make_scenario(template_id: str, rng: np.random.Generator, ranges: dict,
                  seed: int) -> Scenario:
    if template_id not in TEMPLATES:
        raise UnknownTemplate(template_id)
    r = ranges[template_id]
    route = _ego_route(template_id)
    setback = _u(rng, r["ego_setback"])
    if setback > 0:
        # extend the first leg backwards to vary the ego arrival phase
        x0, y0 = route[0]
        x1, y1 = route[1]
        norm = math.hypot(x1 - x0, y1 - y0)
        route = [(x0 - (x1 - x0) / norm * setback, y0 - (y1 - y0) / norm * setback)] + route
    scenario = Scenario(
        template_id=template_id,
        ego_route=route,
        ego_start_speed=_u(rng, r["ego_start_speed"]),
        destination_radius=3.0,
        npcs=_npc_scripts(template_id, rng, ranges),
        time_budget=float(r["time_budget"]),
        seed=seed,
    )
    validate_scenario(scenario)
    return scenario


def fuzz_scenarios(template_id: str, count: int, seed: int,
                   ranges: dict | None = None) -> list[Scenario]:
    """`count` scenarios for a template, deterministic in `seed`."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if template_id not in TEMPLATES:
        raise UnknownTemplate(template_id)
    if ranges is None:
        ranges = load_ranges()
    out = []
    for i in range(count):
        rng = derive_rng(seed, "fuzz", template_id, i)
        out.append(make_scenario(template_id, rng, ranges, seed=int(rng.integers(0, 2**62))))
    return out


# ---------------------------------------------------------------------------
# corpus construction


@dataclass
class Corpus:
    root: Path
    entries: list[dict]

    @classmethod
    def load(cls, root: str | Path) -> "Corpus":
        root = Path(root)
        return cls(root=root, entries=read_corpus_index(root / "index.jsonl"))

    def scenarios(self, outcome: str | None = None,
                  template_id: str | None = None) -> list[tuple[Scenario, dict]]:
        picked = []
        for entry in self.entries:
            if outcome and entry["outcome"] != outcome:
                continue
            if template_id and entry["template_id"] != template_id:
                continue
            picked.append((load_scenario(self.root / entry["file"]), entry))
        return picked

    def counts(self) -> dict:
        out: dict[str, dict[str, int]] = {}
        for entry in self.entries:
            tpl = out.setdefault(entry["template_id"], {"Collision": 0, "Success": 0})
            tpl[entry["outcome"]] += 1
        return out


def build_corpus(out_dir: str | Path, templates: list[str], n_violations: int,
                 n_successes: int, seed: int, policy: DrivingPolicy | None = None,
                 cfg: SimConfig = DEFAULT_SIM, ranges: dict | None = None,
                 max_attempts_per_template: int | None = None) -> Corpus:
    """Fuzz until each template banks its quota of collision and success cases.

    Timeout episodes are discarded. Every banked scenario is re-simulated once
    and must reproduce its recorded outcome.
    """
    if n_violations < 1 or n_successes < 1:
        raise ValueError("quotas must be >= 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    policy = policy or DrivingPolicy()
    if ranges is None:
        ranges = load_ranges()
    cap = max_attempts_per_template or 60 * (n_violations + n_successes)
    entries: list[dict] = []
    for template_id in templates:
        if template_id not in TEMPLATES:
            raise UnknownTemplate(template_id)
        banked = {"Collision": 0, "Success": 0}
        quota = {"Collision": n_violations, "Success": n_successes}
        for attempt in range(cap):
            if banked == quota:
                break
            rng = derive_rng(seed, "fuzz", template_id, attempt)
            scenario = make_scenario(template_id, rng, ranges,
                                     seed=int(rng.integers(0, 2**62)))
            _, outcome = run_episode(scenario, policy, cfg=cfg)
            kind = outcome.result
            if kind == "Timeout" or banked.get(kind, 0) >= quota[kind]:
                continue
            _, replay = run_episode(scenario, policy, cfg=cfg)
            if replay.result != kind:
                raise AssertionError(f"non-reproducible outcome for {template_id}")
            name = f"{template_id}_{kind.lower()}_{banked[kind]:03d}.scn"
            save_scenario(out_dir / name, scenario)
            entries.append({"file": name, "template_id": template_id, "outcome": kind})
            banked[kind] += 1
        if banked != quota:
            raise FuzzBudgetExhausted(
                f"{template_id}: banked {banked} of {quota} in {cap} attempts")
    write_corpus_index(out_dir / "index.jsonl", entries)
    return Corpus(root=out_dir, entries=entries)
