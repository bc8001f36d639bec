from .config import SimConfig, load_experiment
from .engine import Simulation, run_once, run_scenario
from .metrics import MetricsRecord, to_csv

__all__ = ["SimConfig", "load_experiment", "Simulation", "run_once", "run_scenario",
           "MetricsRecord", "to_csv"]
