"""
Poisson and Hawkes rates
========================

A constant-rate model is the simplest hybrid process: one event type, one
state, and an intensity that ignores the history.  Adding an exponential
excitation kernel turns it into a Hawkes process whose long-run rate is
nu / (1 - rho).
"""

import numpy as np

from hybridmpp import (ConstantRate, DiscreteStates, DiscreteTable, ExponentialKernel,
                       ModelSpec, SimConfig, StateDependentHawkes, simulate)
from hybridmpp.assumptions import branching_ratio
from hybridmpp.validation import hawkes_mean_rate_oracle


def one_state(f):
    return ModelSpec([1.0], DiscreteStates(1), DiscreteTable.identity(1, 1), f)


# a Poisson process with rate 2, observed on (0, 1000] for ten seeds
poisson = one_state(ConstantRate([2.0]))
rates = [simulate(poisson, SimConfig(1000.0, seed=s)).trajectory.n_new / 1000 for s in range(10)]
print("poisson rates:", np.round(rates, 3))

# every event raises the rate by alpha * beta, which then decays at rate beta
kernel = ExponentialKernel([[0.5]], 1.0)
hawkes = one_state(StateDependentHawkes([1.0], kernel))
print("branching ratio:", branching_ratio(kernel, [1.0]).rho)
print("stationary rate:", hawkes_mean_rate_oracle([1.0], kernel, [1.0])[0])

res = simulate(hawkes, SimConfig(1e4, seed=0))
print("empirical rate:", res.trajectory.n_new / 1e4)
print("acceptance rate of the thinning:", round(res.diagnostics["acceptance_rate"], 3))
