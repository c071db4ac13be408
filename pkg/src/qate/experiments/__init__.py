"""Configuration-driven sweeps, power-law fits and plot-data bundles."""

from .config import ExperimentConfig, bundled_names, load_config, parse_config
from .figures import FIGURES, emit_figure_data
from .fitting import PowerLawFit, fit_power_law, fit_records
from .output import CSV_HEADER, ResultRecord, emit_results, load_results
from .runner import run_point, run_sweep, sweep_points, write_sweep

__all__ = [
    "CSV_HEADER",
    "FIGURES",
    "ExperimentConfig",
    "PowerLawFit",
    "ResultRecord",
    "bundled_names",
    "emit_figure_data",
    "emit_results",
    "fit_power_law",
    "fit_records",
    "load_config",
    "load_results",
    "parse_config",
    "run_point",
    "run_sweep",
    "sweep_points",
    "write_sweep",
]
