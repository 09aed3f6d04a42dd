"""File formats: scenario documents, episode traces, corpus indexes.

Scenarios are JSON objects whose field names match the in-memory types
one to one (SI units). Traces are line-delimited JSON, one record per
simulator step, with a final line carrying the episode outcome.
"""

from __future__ import annotations

import json
from pathlib import Path

from .sim import EpisodeOutcome, EpisodeTrace, NpcScript, Scenario, TraceStep, VehicleState


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "template_id": s.template_id,
        "ego_route": [list(p) for p in s.ego_route],
        "ego_start_speed": s.ego_start_speed,
        "destination_radius": s.destination_radius,
        "npcs": [
            {
                "route": [list(p) for p in n.route],
                "spawn_time": n.spawn_time,
                "target_speed": n.target_speed,
                "speed_profile": [list(p) for p in n.speed_profile] if n.speed_profile else None,
                "dimensions": list(n.dimensions),
            }
            for n in s.npcs
        ],
        "time_budget": s.time_budget,
        "seed": s.seed,
    }


def scenario_from_dict(d: dict) -> Scenario:
    return Scenario(
        template_id=d["template_id"],
        ego_route=[tuple(p) for p in d["ego_route"]],
        ego_start_speed=float(d["ego_start_speed"]),
        destination_radius=float(d["destination_radius"]),
        npcs=[
            NpcScript(
                route=[tuple(p) for p in n["route"]],
                spawn_time=float(n["spawn_time"]),
                target_speed=float(n["target_speed"]),
                speed_profile=[tuple(p) for p in n["speed_profile"]] if n.get("speed_profile") else None,
                dimensions=tuple(n.get("dimensions", (4.5, 2.0))),
            )
            for n in d["npcs"]
        ],
        time_budget=float(d["time_budget"]),
        seed=int(d["seed"]),
    )


def save_scenario(path: str | Path, scenario: Scenario) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=1) + "\n")


def load_scenario(path: str | Path) -> Scenario:
    return scenario_from_dict(json.loads(Path(path).read_text()))


def _vehicle_row(v: VehicleState | None):
    if v is None:
        return None
    return [v.x, v.y, v.heading, v.speed]


def write_trace(path: str | Path, trace: EpisodeTrace) -> None:
    lines = []
    for step in trace.steps:
        lines.append(json.dumps({
            "t": step.t,
            "ego": _vehicle_row(step.ego),
            "npcs": [_vehicle_row(v) for v in step.npcs],
            "a_ads": step.a_ads,
            "y_safe_hat": step.y_safe_hat,
            "repair_index": step.repair_index,
            "a_final": step.a_final,
            "reward": step.reward,
        }))
    out = trace.outcome
    lines.append(json.dumps({"outcome": out.result, "y_s": out.y_s, "T": out.final_step}))
    Path(path).write_text("\n".join(lines) + "\n")


def read_trace(path: str | Path, ego_dims=(4.5, 2.0), npc_dims=None) -> EpisodeTrace:
    """Rehydrate a trace file; vehicle dimensions are not stored per line."""
    trace = EpisodeTrace()
    for line in Path(path).read_text().splitlines():
        d = json.loads(line)
        if "outcome" in d:
            trace.outcome = EpisodeOutcome(d["outcome"], d["y_s"], d["T"])
            continue
        ego = VehicleState(*d["ego"], length=ego_dims[0], width=ego_dims[1])
        npcs = []
        for i, row in enumerate(d["npcs"]):
            if row is None:
                npcs.append(None)
            else:
                dims = npc_dims[i] if npc_dims else (4.5, 2.0)
                npcs.append(VehicleState(*row, length=dims[0], width=dims[1]))
        trace.steps.append(TraceStep(
            t=d["t"], ego=ego, npcs=npcs, a_ads=d["a_ads"],
            y_safe_hat=d["y_safe_hat"], repair_index=d["repair_index"],
            a_final=d["a_final"], reward=d["reward"],
        ))
    return trace


def write_corpus_index(path: str | Path, entries: list[dict]) -> None:
    lines = [json.dumps(e) for e in entries]
    Path(path).write_text("\n".join(lines) + "\n")


def read_corpus_index(path: str | Path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line]
