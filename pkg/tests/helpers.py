"""Random models and trajectories shared by the property tests and the acceptance suite."""

import numpy as np

from hybridmpp import (ConstantRate, CountDominated, DiscreteStates, DiscreteTable,
                       ExponentialKernel, MarkovRate, ModelSpec, PowerLawKernel,
                       StateDependentHawkes, Trajectory)

# criterion number -> pass/fail line, filled by the acceptance suite
ACCEPTANCE = {}

KINDS = ("constant", "markov", "exp_hawkes", "power_hawkes", "count")


class Affine:
    """Picklable ``a(n) = c0 + c1 * n``."""

    def __init__(self, c0, c1):
        self.c0, self.c1 = c0, c1

    def __call__(self, n):
        return self.c0 + self.c1 * n


def random_table(rng, nx, d):
    p = rng.dirichlet(np.ones(nx), size=(nx, d))
    return DiscreteTable(p / p.sum(axis=2, keepdims=True))


def random_alpha(rng, d, nx, rho=0.7):
    """Non-negative ``(d, nx, d)`` tensor whose state-maximized branching ratio is ``<= rho``."""
    a = rng.uniform(0.0, 1.0, size=(d, nx, d))
    col = a.max(axis=1).sum(axis=0).max()
    return a * (rho * rng.uniform(0.2, 1.0) / col)


def random_initial(rng, d, nx, max_len=4):
    m = int(rng.integers(0, max_len + 1))
    times = np.sort(-rng.uniform(0.0, 5.0, size=m))
    times = np.unique(times)
    return Trajectory(times, rng.integers(0, d, size=len(times)),
                      rng.integers(0, nx, size=len(times)), 0)


def random_model(rng, kind=None, with_initial=True):
    """A small random discrete-state hybrid model of the requested (or a random) kind."""
    if kind is None:
        kind = KINDS[int(rng.integers(len(KINDS)))]
    d = int(rng.integers(1, 4))
    nx = int(rng.integers(1, 4))
    weights = rng.uniform(0.5, 2.0, size=d)
    if kind == "constant":
        f = ConstantRate(rng.uniform(0.1, 3.0, size=d))
    elif kind == "markov":
        f = MarkovRate(rng.uniform(0.2, 3.0, size=nx), rng.uniform(0.1, 2.0, size=d))
    elif kind == "exp_hawkes":
        f = StateDependentHawkes(rng.uniform(0.1, 2.0, size=d),
                                 ExponentialKernel(random_alpha(rng, d, nx),
                                                   rng.uniform(0.5, 3.0)))
    elif kind == "power_hawkes":
        f = StateDependentHawkes(rng.uniform(0.1, 2.0, size=d),
                                 PowerLawKernel(random_alpha(rng, d, nx) * 0.5,
                                                rng.uniform(1.5, 3.0), rng.uniform(0.5, 2.0)))
    else:
        f = CountDominated(Affine(rng.uniform(0.5, 2.0), rng.uniform(0.0, 0.05)), n_events=d)
    init = random_initial(rng, d, nx) if with_initial else None
    return ModelSpec(weights, DiscreteStates(nx), random_table(rng, nx, d), f, init, 0,
                     name=kind)


def random_trajectory(rng, d=3, nx=3, max_len=40):
    n = int(rng.integers(0, max_len + 1))
    times = np.unique(rng.normal(0.0, 10.0, size=n))
    return Trajectory(times, rng.integers(0, d, size=len(times)),
                      rng.integers(0, nx, size=len(times)), int(rng.integers(0, nx)))
