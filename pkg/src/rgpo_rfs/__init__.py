"""Gaussian-mixture random-finite-set tracking resilient to range-gate pull-off jamming."""
from .gaussmix import GaussianComponent, Mixture, NumericalDomainError
from .models import ClutterModel, MeasurementModel, build_cv_model
from .sim import AttackSchedule, ScenarioConfig, generate_scans, generate_trajectory, scenario
from .tracker import RfsTracker, TrackerConfig
from .metrics import TrackerSpec, run_monte_carlo, tracker_spec

__all__ = ["GaussianComponent", "Mixture", "NumericalDomainError", "ClutterModel",
           "MeasurementModel", "build_cv_model", "AttackSchedule", "ScenarioConfig",
           "generate_scans", "generate_trajectory", "scenario", "RfsTracker", "TrackerConfig",
           "TrackerSpec", "run_monte_carlo", "tracker_spec"]
