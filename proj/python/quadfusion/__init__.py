"""Quadrotor sensor-fusion and trajectory-tracking simulator.

Scenarios travel as JSON strings (see ``default_scenario_json`` for the
reference document); results come back as CSV text or plain dicts.
"""

from ._core import (
    default_scenario_json,
    gain_info,
    monte_carlo,
    run_metrics,
    simulate_csv,
)

__all__ = [
    "default_scenario_json",
    "gain_info",
    "monte_carlo",
    "run_metrics",
    "simulate_csv",
]
