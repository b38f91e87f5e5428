"""Data generation, experiment configs, sweep runners and the command line."""
from .config import DatasetConfig, ExperimentConfig, Setting
from .data import ControlledSpec, Table, gen_controlled, load_csv, wine_like, write_csv
from .runners import best_vs_default, replay, run_experiment, run_ps1, run_us1, run_us2, run_us3lite

__all__ = [
    "ControlledSpec",
    "DatasetConfig",
    "ExperimentConfig",
    "Setting",
    "Table",
    "best_vs_default",
    "gen_controlled",
    "load_csv",
    "replay",
    "run_experiment",
    "run_ps1",
    "run_us1",
    "run_us2",
    "run_us3lite",
    "wine_like",
    "write_csv",
]
