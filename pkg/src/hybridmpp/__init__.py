"""Hybrid marked point processes: exact simulation, assumption checks and validation."""

from .core import (ContinuousStates, DiscreteStates, EventRecord, EventType, HistoryView, Mark,
                   Trajectory, count_events, from_enumeration, state_functional, to_enumeration)
from .driver import RNG_ID, Driver
from .functionals import (ConstantRate, CountDominated, MarkovRate, ModelSpec,
                          StateDependentHawkes, event_intensity, intensity_upper_bound, psi,
                          total_event_rate, transition_density, transition_sample)
from .kernels import CustomKernel, ExponentialKernel, PowerLawKernel, state_maximized
from .simulator import (SimConfig, SimResult, Status, detect_explosion, intensity_path,
                        simulate, simulate_batch, simulate_coupled)
from .transitions import ContinuousFamily, DiscreteTable, constant_increments, gaussian_increments

__version__ = "0.1.0"

__all__ = [
    "ContinuousStates", "DiscreteStates", "EventRecord", "EventType", "HistoryView", "Mark",
    "Trajectory", "count_events", "from_enumeration", "state_functional", "to_enumeration",
    "RNG_ID", "Driver",
    "ConstantRate", "CountDominated", "MarkovRate", "ModelSpec", "StateDependentHawkes",
    "event_intensity", "intensity_upper_bound", "psi", "total_event_rate",
    "transition_density", "transition_sample",
    "CustomKernel", "ExponentialKernel", "PowerLawKernel", "state_maximized",
    "SimConfig", "SimResult", "Status", "detect_explosion", "intensity_path", "simulate",
    "simulate_batch", "simulate_coupled",
    "ContinuousFamily", "DiscreteTable", "constant_increments", "gaussian_increments",
]
