"""Simulator constants and config-file overrides."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from pathlib import Path


@dataclass(frozen=True)
class SimConfig:
    """Fixed-timestep kinematic simulator constants (SI units)."""

    dt: float = 0.1
    a_throttle: float = 3.0        # m/s^2 at full throttle command 1.0
    a_brake: float = 8.0           # m/s^2 at full brake command -1.0
    v_max: float = 20.0
    omega_max: float = 0.6         # rad/s turn-rate clamp
    pursuit_lookahead: float = 5.0
    perception_radius: float = 50.0
    lookahead_points: int = 10
    lookahead_spacing: float = 2.0
    ego_length: float = 4.5
    ego_width: float = 2.0


DEFAULT_SIM = SimConfig()


def _override(cfg, section: dict):
    valid = {f.name for f in fields(cfg)}
    unknown = set(section) - valid
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return replace(cfg, **section)


def load_config_file(path: str | Path) -> dict:
    """Parse a JSON config file with optional sim/policy/encoder sections."""
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError("config file must contain a JSON object")
    return raw


def sim_config_from(raw: dict, dt: float | None = None) -> SimConfig:
    cfg = _override(DEFAULT_SIM, raw.get("sim", {}))
    if dt is not None:
        cfg = replace(cfg, dt=dt)
    return cfg
