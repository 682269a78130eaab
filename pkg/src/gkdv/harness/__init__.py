"""Experiment harness: configs, perturbations, run drivers, CLI."""

from .config import (ExperimentConfig, GridConfig, PerturbationConfig,
                     SpongeSettings, TrackSettings, load_config, preset,
                     preset_names)
from .perturbations import make_perturbation, smooth_bump
from .runs import CheckResult, RunReport, execute

__all__ = [
    "ExperimentConfig", "GridConfig", "PerturbationConfig", "SpongeSettings",
    "TrackSettings", "load_config", "preset", "preset_names",
    "make_perturbation", "smooth_bump",
    "CheckResult", "RunReport", "execute",
]
