"""
A state-dependent Hawkes model
==============================

Two event types drive a two-state system.  The excitation left by an event
depends on the state it moved the system into, and the next state is drawn
from a transition table indexed by the event type and the current state.
We simulate it, check the stability assumptions and then test the fit with
time-rescaled residuals and transition counts.
"""

from pathlib import Path

import numpy as np

from hybridmpp import SimConfig, intensity_path, io, simulate
from hybridmpp.assumptions import check_model
from hybridmpp.validation import (rescaled_residuals, state_occupancy,
                                  transition_frequency_test)

doc = io.load_config(Path(__file__).parent / "configs" / "state_hawkes.json")
model = io.build_model(doc)

report = check_model(model)
print(report.render())

res = simulate(model, SimConfig(1000.0, seed=7))
traj = res.trajectory
print("events:", traj.n_new, "per type:", np.bincount(traj.events[traj.n_initial:]))
print("time in each state:", np.round(state_occupancy(traj, 1000.0, 2), 3))

# the intensity just after the prescribed initial records
grid = np.linspace(0.0, 2.0, 5)
print("intensity on", grid.tolist())
print(np.round(intensity_path(model, traj, grid), 3))

# residuals are Exp(1) under the true model and drift under a wrong one
print("residual KS:", rescaled_residuals(traj, model).to_dict())
doubled = model.replace(functional=model.functional.with_nu(2 * model.functional.nu))
print("with nu doubled:", rescaled_residuals(traj, doubled).passed)
print("transition test:", transition_frequency_test(traj, model.transition).passed)
