"""Runtime decision repair lab: 2D driving simulator, learned safety monitor
and repair adapter, comparison baselines, and an evaluation harness."""

__version__ = "0.1.0"
