"""Experiment configuration, scheduling, persistence and the CLI."""

from .config import ConfigError, ExperimentConfig, dumps, load, loads
from .containers import load_atlas, load_field, load_trajectory, save_atlas, save_field, save_trajectory
from .reports import csv_text, fmt, json_text, read_csv, write_csv, write_json
from .runner import RunError, RunManifest, run
from .schedule import MonteCarloSummary, default_workers, montecarlo_schedule
