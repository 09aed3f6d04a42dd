"""Discrete throttle-brake action space shared by the policy, repair heads
and baselines.

Index 0 is the mildest command (0.8 throttle) and index 9 the strongest
brake (-1.0); values descend in steps of 0.2.
"""

from __future__ import annotations

import numpy as np

ACTION_VALUES: tuple[float, ...] = (0.8, 0.6, 0.4, 0.2, 0.0, -0.2, -0.4, -0.6, -0.8, -1.0)
N_ACTIONS = len(ACTION_VALUES)
STRONGEST_INDEX = N_ACTIONS - 1   # full brake
MILDEST_INDEX = 0

_VALUES = np.asarray(ACTION_VALUES)


def action_value(index: int) -> float:
    return ACTION_VALUES[index]


def snap_to_action(command: float) -> float:
    """Nearest action-space value (first match wins on exact midpoints)."""
    return float(_VALUES[int(np.argmin(np.abs(_VALUES - command)))])


def snap_to_index(command: float) -> int:
    return int(np.argmin(np.abs(_VALUES - command)))
