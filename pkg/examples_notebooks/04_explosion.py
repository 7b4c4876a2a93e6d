"""
Detecting explosion
===================

A pure-birth process with rate a(n) = (1 + n)^2 after n events has
sum 1/a(n) = pi^2/6 < infinity, so it fires infinitely many events before
a finite time T_inf.  The simulator stops at the event cap and the
explosion check estimates T_inf from the last event time.
"""

import math

import numpy as np

from hybridmpp import (ConstantRate, CountDominated, DiscreteStates, DiscreteTable, ModelSpec,
                       SimConfig, detect_explosion, simulate)
from hybridmpp.assumptions import summability_report


def one_state(f):
    return ModelSpec([1.0], DiscreteStates(1), DiscreteTable.identity(1, 1), f)


def a(n):
    return (1.0 + n) ** 2


rep = summability_report(a, 10 ** 5, declared_divergent=False)
print("partial sum of 1/a(n):", rep.partial_sum, "warning:", rep.explosion_warning)

birth = one_state(CountDominated(a))
t_inf = []
for s in range(200):
    res = simulate(birth, SimConfig(10.0, seed=s, max_events=100_000))
    t_inf.append(detect_explosion(res).t_inf)
# T_inf has standard deviation about 1, so 200 runs pin the mean to about 0.07
t_inf = np.array(t_inf)
se = t_inf.std(ddof=1) / math.sqrt(len(t_inf))
print(f"mean T_inf over 200 runs: {t_inf.mean():.3f} +- {se:.3f} (exact {math.pi ** 2 / 6:.4f})")

control = simulate(one_state(ConstantRate([2.0])), SimConfig(10.0, seed=0))
print("constant rate:", control.status.value, detect_explosion(control).kind)
