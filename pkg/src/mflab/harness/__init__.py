"""Experiment orchestration: configs, runs, sweeps, fits and output files."""
from .config import (ExperimentConfig, config_from_dict, dilute_preset, load_config,
                     reference_preset, semiclassical_preset)
from .output import CSV_COLUMNS, OutputError, emit_outputs, parse_csv, render_csv, replot
from .runner import (BaselineComparison, RateFit, RunResult, SweepResult, compare_baseline,
                     fit_rate, initial_data, initial_orbitals, run_single, run_sweep)

__all__ = [
    "ExperimentConfig", "config_from_dict", "dilute_preset", "load_config", "reference_preset",
    "semiclassical_preset", "CSV_COLUMNS", "OutputError", "emit_outputs", "parse_csv", "render_csv",
    "replot", "BaselineComparison", "RateFit", "RunResult", "SweepResult", "compare_baseline",
    "fit_rate", "initial_data", "initial_orbitals", "run_single", "run_sweep",
]
