"""Discrete-event simulator for adaptive replica selection in replicated
key-value stores."""

from .harness import ConfigError, Scenario, desk, full, load_config, run_once, run_scenario
from .simulation import RunReport, Simulation

__all__ = [
    "ConfigError", "RunReport", "Scenario", "Simulation", "desk", "full",
    "load_config", "run_once", "run_scenario",
]
