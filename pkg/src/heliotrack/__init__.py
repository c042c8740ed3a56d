"""
heliotrack: sliding-mode control of a two-axis stepper-driven sun tracker.

The package is a small simulation library. ``motor`` holds the d-q stepper
model, ``controller`` the sliding-mode tracking law, ``observer`` the
velocity observer, ``sun`` the ephemeris and reference generation,
``energy`` the incidence-angle energy model and ``sim`` the closed-loop
harness with its metrics. ``heliotrack.cli`` wires them to a command line.
"""
from .config import ConfigError, SimConfig, config_from_dict, dump_config, load_config
from .controller import ControllerGains, SlidingModeController, control_step
from .energy import PanelOrientation, daily_energy_ratio, ratio_table
from .motor import (ControlInput, DomainError, FlatReference, MotorParams, MotorState,
                    integrate_step, inverse_dynamics)
from .observer import ObserverGains, ObserverState, observer_step, validate_gains
from .sim import (Metrics, SimLog, SimulationError, compute_metrics, run_simulation,
                  sweep)
from .sun import DisturbanceSpec, Site, reference_profile, solar_position

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "SimConfig", "config_from_dict", "dump_config", "load_config",
    "ControllerGains", "SlidingModeController", "control_step",
    "PanelOrientation", "daily_energy_ratio", "ratio_table",
    "ControlInput", "DomainError", "FlatReference", "MotorParams", "MotorState",
    "integrate_step", "inverse_dynamics",
    "ObserverGains", "ObserverState", "observer_step", "validate_gains",
    "Metrics", "SimLog", "SimulationError", "compute_metrics", "run_simulation", "sweep",
    "DisturbanceSpec", "Site", "reference_profile", "solar_position",
]
