"""Scenario orchestration: data, configuration, the round loop and the CLI."""
from .config import SimConfig, config_from_dict, load_config
from .data import generate_toy_stream, load_csv, toy_eta
from .simulation import RoundMetrics, RunArtifact, Simulation, build_scenario, run_round, run_scenario
